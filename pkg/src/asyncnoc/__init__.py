"""Discrete-event model of a GALS mesh network-on-chip with WISHBONE network adapters."""

from .config import ConfigError, SimConfig, load_config, parse_config
from .kernel import ClockDomain, Simulator, SimulationError, Trace, TraceKind, TraceRecord
from .router import DropPolicy, RouterConfig
from .stats import RunReport
from .system import Simulation, simulate
from .topology import Direction, MeshDims, SourceRoute, compute_route

__version__ = "0.1.0"

__all__ = [
    "ClockDomain", "ConfigError", "Direction", "DropPolicy", "MeshDims", "RouterConfig",
    "RunReport", "SimConfig", "Simulation", "SimulationError", "Simulator", "SourceRoute",
    "Trace", "TraceKind", "TraceRecord", "compute_route", "load_config", "parse_config",
    "simulate",
]
