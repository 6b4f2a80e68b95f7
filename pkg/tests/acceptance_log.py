"""Collects one pass/fail line per acceptance criterion."""


class _Results:
    def __init__(self):
        self._rows: dict[int, tuple[bool, str]] = {}

    def __bool__(self):
        return bool(self._rows)

    def set(self, number: int, ok: bool, detail: str) -> str:
        self._rows[number] = (ok, detail)
        line = self.line(number)
        print(line)
        return line

    def line(self, number: int) -> str:
        ok, detail = self._rows[number]
        return f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"

    def lines(self):
        return [self.line(n) for n in sorted(self._rows)]


RESULTS = _Results()
