"""Exception types raised across the package."""


class MoreauLabError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MoreauLabError, ValueError):
    pass


class NotTwiceDifferentiable(MoreauLabError):
    """The Legendre function has no Hessian where one was requested."""


class NormMismatch(MoreauLabError, ValueError):
    pass


class InvalidParams(MoreauLabError, ValueError):
    pass


class DomainError(MoreauLabError, ValueError):
    """A point lies outside the domain of the regularizer."""


class NotStronglyConvex(MoreauLabError, ValueError):
    """The requested rho_bar does not exceed the weak-convexity modulus."""


class MaxIterations(MoreauLabError):
    """The prox solver hit its iteration budget before certifying ``tol``.

    The best iterate found so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CorruptionTooHigh(MoreauLabError, ValueError):
    pass


class InvalidLink(MoreauLabError, ValueError):
    pass


class NetTooLarge(MoreauLabError):
    pass


class ConfigError(MoreauLabError, ValueError):
    pass


class SchemaError(MoreauLabError, ValueError):
    pass
