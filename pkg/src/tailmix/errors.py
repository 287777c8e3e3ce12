"""Exception hierarchy shared by every tailmix module."""


class TailmixError(Exception):
    """Base class for data and model errors (CLI exit code 2)."""


class InvalidParameterError(TailmixError, ValueError):
    pass


class SupportViolationError(TailmixError):
    """Data fall outside the support of the requested bulk family."""


class TooFewExceedancesError(TailmixError):
    pass


class TooFewBlocksError(TailmixError):
    pass


class DegenerateSampleError(TailmixError):
    """Zero-variance or otherwise unusable sample."""


class NonConvergenceError(TailmixError):
    pass


class InfeasibleError(TailmixError):
    """No threshold candidate admitted a finite likelihood."""


class NoJunctionError(TailmixError):
    pass


class NonIntegrableTailError(TailmixError):
    pass
