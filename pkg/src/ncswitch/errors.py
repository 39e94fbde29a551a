"""Exception hierarchy shared by all modules."""


class NcswitchError(Exception):
    """Base class for all domain errors."""


class PatternFormatError(NcswitchError):
    """Pattern document is structurally malformed."""


class InvalidRateError(NcswitchError):
    """A flow carries a rate that is not a nonnegative rational."""


class InvalidFanoutError(NcswitchError):
    """A fanout is empty or references an output outside [1..N]."""


class DuplicateOutputError(NcswitchError):
    """A fanout lists the same output twice."""


class DuplicateFlowError(NcswitchError):
    """Two flows share the same (input, fanout) identity."""


class GraphSizeLimitError(NcswitchError):
    """Graph exceeds the configured enumeration limit."""

    def __init__(self, size: int, limit: int, what: str = "graph"):
        self.size = size
        self.limit = limit
        super().__init__(f"{what} has {size} vertices, limit is {limit}")


class DimensionLimitError(NcswitchError):
    """Polytope vertex enumeration is too large to attempt."""


class InadmissiblePatternError(NcswitchError):
    """Operation requires an admissible traffic pattern."""


class NotInStabError(NcswitchError):
    """Rate vector lies outside the coded rate region."""

    def __init__(self, chi_f):
        self.chi_f = chi_f
        super().__init__(
            f"enhanced rate vector is outside the stable set polytope "
            f"(fractional chromatic number {chi_f})"
        )


class LengthMismatchError(NcswitchError):
    """Coefficient vector length does not match the ambient space."""


class ImpossibleReceiverError(NcswitchError):
    """A receiver already knows everything the sender knows."""


class CodingError(NcswitchError):
    """Erasure code construction or decode failure."""


class BatchingError(NcswitchError):
    """Invalid batching parameters."""


class ScheduleError(NcswitchError):
    """Schedule construction failed (rates outside the target region)."""
