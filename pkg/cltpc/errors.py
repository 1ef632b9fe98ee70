# cltpc/errors.py
from __future__ import annotations


class CltpcError(ValueError):
    """Base for every error raised on bad input, models or files."""


# ---------- data ----------

class DataError(CltpcError):
    pass


class EmptyFile(DataError):
    def __init__(self, path: str):
        super().__init__(f"{path}: empty file")
        self.path = path


class MalformedRow(DataError):
    def __init__(self, line: int, reason: str, path: str | None = None):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}line {line}: {reason}")
        self.line = line
        self.reason = reason


class DimensionMismatch(DataError):
    def __init__(self, expected: int, got: int, what: str = "columns"):
        super().__init__(f"{what} mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class ManifestMismatch(DataError):
    def __init__(self, name: str, field: str, expected, got):
        super().__init__(f"dataset {name!r}: {field} expected {expected}, got {got}")
        self.name = name
        self.field = field


# ---------- models ----------

class ModelError(CltpcError):
    pass


class DegenerateTable(ModelError):
    def __init__(self, var: int, parent: int, state: int):
        super().__init__(
            f"conditional table of variable {var} given parent {parent}={state} is 0/0; "
            f"use alpha > 0"
        )
        self.var = var
        self.parent = parent
        self.state = state


class InvariantViolation(ModelError):
    def __init__(self, node: int, message: str):
        super().__init__(f"node {node}: {message}")
        self.node = node


class DanglingChild(InvariantViolation):
    def __init__(self, node: int, child: int):
        super().__init__(node, f"child {child} is not below its parent in the arena")
        self.child = child


class EmptySum(InvariantViolation):
    def __init__(self, node: int):
        super().__init__(node, "sum unit has no children")


class UnnormalizedSum(InvariantViolation):
    def __init__(self, node: int, log_total: float):
        super().__init__(node, f"sum weights are not normalized (logsumexp = {log_total:.6g})")
        self.log_total = log_total


class FormatVersionMismatch(ModelError):
    def __init__(self, found, expected: int):
        super().__init__(f"format_version {found!r} is not supported (expected {expected})")
        self.found = found
        self.expected = expected


class TooManyVariables(ModelError):
    def __init__(self, var_count: int, cap: int):
        super().__init__(f"{var_count} variables exceed the enumeration cap of {cap}")
        self.var_count = var_count
        self.cap = cap


class ZeroEvidenceProbability(ModelError):
    def __init__(self, rows):
        rows = list(rows)
        shown = ", ".join(str(r) for r in rows[:10])
        more = "" if len(rows) <= 10 else f" (+{len(rows) - 10} more)"
        super().__init__(f"evidence has zero probability in rows {shown}{more}")
        self.rows = rows
