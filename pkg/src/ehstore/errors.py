"""Exception hierarchy shared by the analysis and simulation modules."""


class EHError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(EHError, ValueError):
    """Invalid distribution, channel or model parameter."""


class NumericalError(EHError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy value."""


class DivergenceError(NumericalError):
    """Moment generating function does not exist at the requested argument.

    ``boundary`` is the edge of the MGF domain (``s`` values on the far side
    diverge).
    """

    def __init__(self, message, boundary=None):
        super().__init__(message)
        self.boundary = boundary


class StabilityError(EHError, ValueError):
    """Mean arrival is not strictly below mean demand."""


class NoRootError(NumericalError):
    def __init__(self, message, edge=None, value_at_edge=None):
        super().__init__(message)
        self.edge = edge
        self.value_at_edge = value_at_edge


class TruncationError(NumericalError):
    """Survival counting ran out of paths before the requested depth.

    ``last_reliable_m`` is the deepest transition whose estimate is defined;
    ``q`` and ``std_err`` hold the estimates up to that depth.
    """

    def __init__(self, message, last_reliable_m, q=None, std_err=None, survivors=None):
        super().__init__(message)
        self.last_reliable_m = last_reliable_m
        self.q = q
        self.std_err = std_err
        self.survivors = survivors


class BoundError(NumericalError):
    """Geometric tail of the outage bound diverges (q_{alpha+1} = 1)."""


class SingularityError(NumericalError):
    pass


class UnreachableStateError(NumericalError):
    pass


class DegenerateChainError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class InstabilityError(EHError, RuntimeError):
    """Data buffer grows without bound under the offered load."""


class ConfigError(EHError, ValueError):
    """Malformed experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ValidationFailure(EHError, AssertionError):
    """A cross-check between analysis and simulation missed its tolerance."""
