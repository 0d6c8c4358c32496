"""Bottom of the L2 spectrum: the curvature lower bound and exhaustion estimates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .numerics import discrete_laplacian, smallest_eigenpair

CONSISTENCY_RTOL = 0.05


@dataclass(frozen=True)
class SpectrumReport:
    """Dirichlet ground-state energies over an exhaustion and their limit.

    ``numeric_estimates`` holds ``(R, lambda_1(B_p(R)))`` pairs; ``extrapolated``
    comes from fitting ``lambda_inf + c / R^2`` on the last three radii.
    """

    analytic_lower: float
    numeric_estimates: tuple
    extrapolated: float
    consistent: bool
    fit_coefficient: float = 0.0
    tolerance: float = CONSISTENCY_RTOL
    notes: tuple = field(default_factory=tuple)

    @property
    def monotone(self):
        lam = [v for _, v in self.numeric_estimates]
        return all(b < a for a, b in zip(lam, lam[1:]))

    def to_dict(self):
        return {
            "analytic_lower": self.analytic_lower,
            "estimates": [{"R": R, "lambda": lam} for R, lam in self.numeric_estimates],
            "extrapolated": self.extrapolated,
            "consistent": self.consistent,
            "monotone": self.monotone,
            "invariant": "extrapolated >= b^2/4 * (1 - tol)",
            "tolerance": self.tolerance,
        }


def lambda1_lower_bound(model) -> float:
    """``b^2 / 4`` for a model certified with ``Ric <= -b^2``."""
    if not model.certified:
        raise DomainError("model has no pinching certificate")
    if not model.b_sq > 0:
        raise DomainError("b^2 must be positive")
    return model.b_sq / 4.0


def richardson_inverse_square(radii, values):
    """Least-squares fit of ``values = lam_inf + c / R^2``; returns ``(lam_inf, c)``."""
    R = np.asarray(radii, dtype=float)
    y = np.asarray(values, dtype=float)
    X = np.column_stack([np.ones_like(R), R ** -2])
    (lam_inf, c), *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(lam_inf), float(c)


def lambda1_exhaustion(model, grid, method="lanczos", tol=CONSISTENCY_RTOL) -> SpectrumReport:
    """Ground-state energy of every exhaustion ball plus the extrapolated limit."""
    radii = tuple(grid.exhaustion_radii)
    if len(radii) < 3:
        raise ConfigurationError("need at least three exhaustion radii")
    lower = lambda1_lower_bound(model)
    op = discrete_laplacian(grid, model)
    estimates = []
    for R in radii:
        lam, _ = smallest_eigenpair(op, R, method=method)
        estimates.append((float(R), float(lam)))
    op._factors.clear()
    lam_inf, c = richardson_inverse_square(radii[-3:], [v for _, v in estimates[-3:]])
    lam_inf = min(lam_inf, min(v for _, v in estimates))
    consistent = lam_inf >= lower * (1.0 - tol)
    return SpectrumReport(lower, tuple(estimates), lam_inf, bool(consistent), c, tol)
