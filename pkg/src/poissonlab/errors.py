"""Exception hierarchy shared across the package."""


class PoissonLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(PoissonLabError, ValueError):
    """Argument outside the domain of an operation (negative radius, eps <= 0, ...)."""


class ConfigurationError(PoissonLabError, ValueError):
    """Invalid grid/model/run configuration."""


class SolverError(PoissonLabError, RuntimeError):
    """A linear or eigenvalue solve failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class QuadratureError(PoissonLabError, RuntimeError):
    """Adaptive quadrature did not converge."""


class ConstructionError(PoissonLabError, RuntimeError):
    """A constructed object violates an invariant it must satisfy by construction."""


class StepSizeError(PoissonLabError, RuntimeError):
    """Time step unstable for the chosen scheme."""


class DivergenceError(PoissonLabError, RuntimeError):
    """A time-dependent run blew up."""
