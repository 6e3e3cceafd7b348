"""Error hierarchy shared across the toolkit.

Every error names the module and operation that raised it so that CLI and
service layers can report actionable context and map failures to exit codes
(2 for data problems, 3 for solver problems).
"""


class FrontierLabError(Exception):
    """Base class; carries the raising module and operation."""

    exit_code = 1

    def __init__(self, module: str, operation: str, message: str):
        self.module = module
        self.operation = operation
        self.message = message
        super().__init__(f"[{module}.{operation}] {message}")


class DataError(FrontierLabError):
    """Unreadable, unparseable, or invariant-violating input data."""

    exit_code = 2


class InfeasibleError(FrontierLabError):
    """The requested optimization problem has no feasible point."""

    exit_code = 3


class SolverError(FrontierLabError):
    """A solver failed to converge or hit a numerical breakdown."""

    exit_code = 3
