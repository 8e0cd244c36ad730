"""Exception types raised across the package."""


class EntropyFlowError(Exception):
    """Base class for all errors raised by entropyflow."""


class SpecError(EntropyFlowError, ValueError):
    """A density specification string could not be parsed."""


class UnknownFamily(SpecError):
    pass


class ParamOutOfRange(SpecError):
    """Parameters outside the log-concave range of a family (e.g. gamma shape < 1)."""


class GridFileError(SpecError):
    pass


class UnboundedTail(EntropyFlowError):
    pass


class DegenerateMass(EntropyFlowError):
    pass


class NotNormalized(EntropyFlowError):
    pass


class NonpositiveScale(EntropyFlowError, ValueError):
    pass


class WeightMismatch(EntropyFlowError, ValueError):
    pass


class GridTooCoarse(EntropyFlowError):
    pass


class NonsmoothAtZeroTime(EntropyFlowError):
    """Derivative functionals requested on a kinked density before heat smoothing."""


class StepTooLarge(EntropyFlowError, ValueError):
    pass


class StencilOutOfDomain(EntropyFlowError, ValueError):
    pass


class DimensionMismatch(EntropyFlowError, ValueError):
    pass


class FlowError(EntropyFlowError):
    """An evolve failure inside a flow curve; carries the offending time."""

    def __init__(self, t, cause):
        super().__init__(f"evolve failed at t={t!r}: {cause}")
        self.t = t
        self.cause = cause


class NotLogConcaveWarning(UserWarning):
    pass


class NotLogConcave(EntropyFlowError, ValueError):
    """A check restricted to log-concave inputs was given another density outside explore mode."""
