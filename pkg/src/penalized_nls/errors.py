"""Exception hierarchy shared by the solver modules."""


class PenalizedNLSError(Exception):
    """Base class for all package errors."""


class InvalidParameters(PenalizedNLSError, ValueError):
    pass


class NoBracket(PenalizedNLSError):
    """The shooting bisection could not find an initial bracket."""


class ToleranceNotMet(PenalizedNLSError):
    """Bisection stalled before reaching the requested width."""


class DegenerateProfile(PenalizedNLSError, ValueError):
    """A profile carries no mass above the decay floor."""


class NonpositivePotential(PenalizedNLSError, ValueError):
    pass


class ModeDimensionMismatch(PenalizedNLSError, ValueError):
    pass


class DegenerateDirection(PenalizedNLSError):
    """u_+ vanishes on the region, so no Nehari rescaling exists."""


class BracketFailure(PenalizedNLSError):
    pass


class MaxIterExceeded(PenalizedNLSError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class PinEscape(PenalizedNLSError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ZeroMass(PenalizedNLSError, ValueError):
    pass


class ConfigError(PenalizedNLSError, ValueError):
    pass


class SolveFailure(PenalizedNLSError):
    pass
