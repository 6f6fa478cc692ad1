"""Exception hierarchy for depconc."""


class DepconcError(Exception):
    """Base class for all library errors."""


class CapExceeded(DepconcError):
    pass


class InvalidLaw(DepconcError):
    pass


class InvalidMetric(DepconcError):
    pass


class ZeroConditioningEvent(DepconcError):
    pass


class DimensionMismatch(DepconcError):
    pass


class SolverFailure(DepconcError):
    pass


class NoConvergence(DepconcError):
    pass


class UniquenessFails(DepconcError):
    pass


class WrongRepresentation(DepconcError):
    pass


class NonpositivePotential(DepconcError):
    pass


class BadPartition(DepconcError):
    pass


class InvalidGamma(DepconcError):
    pass


class MissingCoordinateConstants(DepconcError):
    pass


class WeightsTooLarge(DepconcError):
    pass


class QuadratureFailure(DepconcError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SoundnessViolation(DepconcError):
    """Raised when an applicable bound falls below an exact tail.

    ``witness`` carries everything needed to replay the counterexample.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness or {}
