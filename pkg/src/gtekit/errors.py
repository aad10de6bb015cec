"""Exception hierarchy shared by all gtekit modules."""


class GteError(Exception):
    """Base class for all toolkit errors."""


class DataError(GteError, ValueError):
    """Malformed or inconsistent input data."""


class GraphFormatError(DataError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class SplitOverlapError(DataError):
    def __init__(self, pairs):
        self.pairs = list(pairs)
        shown = ", ".join(f"({u!r}, {i!r})" for u, i in self.pairs[:10])
        more = "" if len(self.pairs) <= 10 else f" ... and {len(self.pairs) - 10} more"
        super().__init__(f"{len(self.pairs)} interaction(s) present in both train and test: {shown}{more}")


class PreconditionError(GteError, ValueError):
    """An operation was called outside its documented domain."""


class BudgetExceededError(GteError, RuntimeError):
    """Brute-force enumeration ran past its step budget."""


class WalkCountOverflowError(GteError, OverflowError):
    """An exact walk count does not fit in a signed 64-bit integer."""


class MemoryBudgetError(GteError, MemoryError):
    """A dense computation would exceed the configured memory budget."""


class NonFiniteError(GteError, FloatingPointError):
    """Floating-point propagation produced inf or nan."""


class InvariantViolation(GteError, AssertionError):
    """An exhaustive checker found a counterexample."""
