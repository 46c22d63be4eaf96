"""Exception types raised by the library."""


class FinmorseError(Exception):
    """Base class for all library errors."""


class PointOffManifold(FinmorseError, ValueError):
    """A point fails the on-manifold check beyond tolerance."""


class StepTooLarge(FinmorseError, ValueError):
    """A retraction step reaches the cut locus (sphere: |v| >= pi*r)."""


class DegenerateFiberVector(FinmorseError, ValueError):
    """Fiber derivatives requested at a vector below the regularity threshold."""


class DegenerateCurve(FinmorseError, ValueError):
    """A discrete curve has a node speed below the regularity threshold."""


class StrongConvexityViolated(FinmorseError, RuntimeError):
    """A sampled fiber Hessian of F^2 has a nonpositive eigenvalue."""


class WrongBoundaryKind(FinmorseError, ValueError):
    """Operation requires a periodic / isometry-graph boundary condition."""


class ClosureViolated(FinmorseError, RuntimeError):
    """Invariant extension requested but the velocity closure residual is too large."""


class NoConvergence(FinmorseError, RuntimeError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, iterations: int, residual: float, message: str = ""):
        self.iterations = iterations
        self.residual = residual
        msg = message or f"no convergence after {iterations} iterations (residual {residual:.3e})"
        super().__init__(msg)


class CollapsedToConstant(FinmorseError, RuntimeError):
    """BVP solve drifted into the constant-path regime (fixed point of the isometry)."""


class GapNotFound(FinmorseError, RuntimeError):
    """No admissible spectral gap around zero under the clustering policy."""


class NewtonDiverged(FinmorseError, RuntimeError):
    """Newton solve of the reduction equation diverged; the kernel ball is too large."""

    def __init__(self, xi=None, message: str = "reduction Newton diverged"):
        self.xi = xi
        super().__init__(message)


class BoundViolated(FinmorseError, RuntimeError):
    """A splitting-consequence inequality failed at a sample."""

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


class ConfigError(FinmorseError, ValueError):
    """Experiment configuration failed validation (field path in the message)."""
