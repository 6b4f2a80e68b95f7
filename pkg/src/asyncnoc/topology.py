"""Mesh geometry and source routes.

Coordinates start at the top-left node and ``y`` grows southward. Node index
is ``y * cols + x``. Each hop of a route is a 2-bit port code packed
least-significant pair first; the final pair names the port the packet will
arrive on at its destination, which routers read as "deliver locally".
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple

__all__ = [
    "Direction", "COMPASS", "MeshDims", "NodeCoord", "SourceRoute", "RouteError",
    "MalformedHeader", "MAX_HOPS", "opposite", "coord_of", "index_of", "neighbor",
    "compute_route", "encode_route", "decode_next_hop", "hop_distance",
]

MAX_HOPS = 16
MAX_NODES = 16


class RouteError(ValueError):
    pass


class MalformedHeader(RouteError):
    pass


class Direction(enum.IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    LOCAL = 4

    @property
    def code(self) -> int:
        if self is Direction.LOCAL:
            raise RouteError("the local port has no 2-bit code")
        return int(self)

    @property
    def short(self) -> str:
        return self.name[0]


COMPASS = (Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST)

_OPPOSITE = {
    Direction.NORTH: Direction.SOUTH,
    Direction.SOUTH: Direction.NORTH,
    Direction.EAST: Direction.WEST,
    Direction.WEST: Direction.EAST,
}

_STEP = {
    Direction.NORTH: (0, -1),
    Direction.SOUTH: (0, 1),
    Direction.EAST: (1, 0),
    Direction.WEST: (-1, 0),
}


def opposite(d: Direction) -> Direction:
    try:
        return _OPPOSITE[d]
    except KeyError:
        raise RouteError(f"{d.name} has no opposite") from None


@dataclass(frozen=True)
class MeshDims:
    cols: int
    rows: int

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError("mesh dimensions must be positive")
        if self.cols * self.rows > MAX_NODES:
            raise ValueError(
                f"mesh {self.cols}x{self.rows} exceeds {MAX_NODES} nodes "
                "(node index must fit the 4-bit address prefix)")

    @property
    def nodes(self) -> int:
        return self.cols * self.rows

    def coords(self) -> Iterable["NodeCoord"]:
        for i in range(self.nodes):
            yield coord_of(i, self)


class NodeCoord(NamedTuple):
    x: int
    y: int


def coord_of(node_index: int, dims: MeshDims) -> NodeCoord:
    if not 0 <= node_index < dims.nodes:
        raise RouteError(f"node index {node_index} outside {dims.cols}x{dims.rows} mesh")
    return NodeCoord(node_index % dims.cols, node_index // dims.cols)


def index_of(c: NodeCoord, dims: MeshDims) -> int:
    if not (0 <= c.x < dims.cols and 0 <= c.y < dims.rows):
        raise RouteError(f"{c} outside {dims.cols}x{dims.rows} mesh")
    return c.y * dims.cols + c.x


def neighbor(c: NodeCoord, d: Direction, dims: MeshDims):
    """Coordinate one hop from ``c`` in direction ``d``, or None at the edge."""
    dx, dy = _STEP[d]
    x, y = c.x + dx, c.y + dy
    if 0 <= x < dims.cols and 0 <= y < dims.rows:
        return NodeCoord(x, y)
    return None


def hop_distance(a: NodeCoord, b: NodeCoord) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


@dataclass(frozen=True)
class SourceRoute:
    packed: int = 0
    hops: int = 0

    def __post_init__(self):
        if not 0 <= self.hops <= MAX_HOPS:
            raise RouteError(f"hop count {self.hops} outside 0..{MAX_HOPS}")
        if not 0 <= self.packed < (1 << (2 * MAX_HOPS)):
            raise RouteError(f"packed route {self.packed:#x} wider than 32 bits")
        if self.packed >> (2 * self.hops):
            raise RouteError(f"packed route {self.packed:#x} has codes beyond hop {self.hops}")

    def codes(self) -> list[int]:
        return [(self.packed >> (2 * k)) & 0b11 for k in range(self.hops)]

    def consume(self) -> "SourceRoute":
        if self.hops == 0:
            raise MalformedHeader("route exhausted")
        return SourceRoute(self.packed >> 2, self.hops - 1)


EMPTY_ROUTE = SourceRoute()


def compute_route(src: NodeCoord, dst: NodeCoord) -> list[Direction]:
    """X-first minimal route, terminated by the code of the arrival port."""
    if src == dst:
        raise RouteError(f"no network route from {src} to itself; use loopback")
    dx, dy = dst.x - src.x, dst.y - src.y
    hops = [Direction.EAST if dx > 0 else Direction.WEST] * abs(dx)
    hops += [Direction.SOUTH if dy > 0 else Direction.NORTH] * abs(dy)
    hops.append(opposite(hops[-1]))
    return hops


def encode_route(hops: list[Direction]) -> SourceRoute:
    if not 1 <= len(hops) <= MAX_HOPS:
        raise RouteError(f"route of {len(hops)} hops does not fit {MAX_HOPS} 2-bit slots")
    packed = 0
    for k, d in enumerate(hops):
        packed |= d.code << (2 * k)
    return SourceRoute(packed, len(hops))


def decode_next_hop(route: SourceRoute, arrived_from: Direction) -> tuple[Direction, SourceRoute]:
    """Consume one hop code at a router.

    A code equal to the port the packet came in on means local delivery; a
    packet injected from the local port therefore never decodes to LOCAL.
    """
    if route.hops == 0:
        raise MalformedHeader("header carries no hop codes")
    code = route.packed & 0b11
    if arrived_from is not Direction.LOCAL and code == arrived_from.code:
        out = Direction.LOCAL
    else:
        out = Direction(code)
    return out, route.consume()
