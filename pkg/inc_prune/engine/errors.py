import time
from typing import Optional


class EngineError(Exception):
    pass


class ParseError(EngineError):
    """Raised for problem or alpha files that do not follow the grammar."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(EngineError):
    """A model or belief violates a stochasticity invariant."""


class ZeroProbabilityObservation(EngineError):
    pass


class NumericalFailure(EngineError):
    """The simplex lost feasibility or its pivot budget, or a fold step came out too small."""


class EmptySet(EngineError):
    pass


class CombinatorialBlowup(EngineError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"cross sum would materialize {size} vectors (cap {cap})")


class ProvenanceMissing(EngineError):
    pass


class SolveTimeout(EngineError):
    """The cooperative deadline passed; `partial` holds any finished stages."""
    partial = None


class NonConvergentWarning(UserWarning):
    pass


def check_deadline(deadline: Optional[float], where: str):
    """Raises SolveTimeout once the monotonic clock passes `deadline`."""
    if deadline is not None and time.monotonic() > deadline:
        raise SolveTimeout(f"deadline passed during {where}")
