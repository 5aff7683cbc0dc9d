"""Exception hierarchy shared by all modules."""


class LGeometryError(Exception):
    """Base class for every error raised by :mod:`lmorse`."""


class NegativeTau(LGeometryError, ValueError):
    pass


class InvalidChart(LGeometryError, ValueError):
    pass


class NotApplicable(LGeometryError, ValueError):
    pass


class ToleranceNotMet(LGeometryError, RuntimeError):
    pass


class ChartEscape(LGeometryError, RuntimeError):
    pass


class UnresolvedCluster(LGeometryError, RuntimeError):
    """Two candidate conjugate parameters are closer than the requested separation."""


class ConjugateEndpoint(LGeometryError, RuntimeError):
    """The Jacobi boundary-value problem is singular because the endpoint is conjugate."""


class QuadratureFailure(LGeometryError, RuntimeError):
    pass


class EigensolverFailure(LGeometryError, RuntimeError):
    pass


class NonMonotoneTau(LGeometryError, ValueError):
    pass


class StepTooSmall(LGeometryError, RuntimeError):
    """Finite-difference step is dominated by floating point cancellation."""
