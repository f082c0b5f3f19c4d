"""Exception types shared across the package."""


class SketchError(Exception):
    """Base class for all mergesketch errors."""


class ValueTooWide(SketchError):
    """Value does not fit the target counter's bit width."""


class MaxLevelReached(SketchError):
    """Counter is already at the maximum merge level and cannot grow."""


class SplitUnrepresentable(SketchError):
    """Counter value does not fit the half-width counters a split would create."""


class SplitNotMaxMerge(SketchError):
    """Splitting is only sound for max-merged counters."""


class NegativeWeight(SketchError):
    """Update weight must be non-negative for this sketch kind."""


class ConfigMismatch(SketchError):
    """Sketches must share an identical configuration (including seed)."""


class NegativeResult(SketchError):
    """Subtraction produced a negative counter; the containment guarantee was violated."""


class LevelTooSmall(SketchError):
    """Requested coarsening level is below the sketch's current maximum merge level."""


class EmptyStream(SketchError):
    """Operation requires a non-empty processed stream."""


class EmptySeries(SketchError):
    """Operation requires a non-empty error series."""


class EmptyOracle(SketchError):
    """Operation requires an oracle that has seen at least one item."""


class AllSlotsOccupied(SketchError):
    """Linear counting is undefined when no counter slot is estimated to be zero."""


class ParseError(SketchError):
    """Malformed trace file record."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
