"""Rotationally symmetric model manifolds ``dr^2 + phi(r)^2 dtheta^2``.

Warping functions come from closed-form families so that phi and its
derivatives are exact; curvature pinching constants are measured by a dense
scan and stored on the model rather than assumed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError

# above this radius the closed forms are evaluated in exp-scaled form
_LARGE_R = 20.0
_SMALL_R = 1e-4


def _sech(r):
    e = np.exp(-np.abs(r))
    return 2.0 * e / (1.0 + e * e)


class _Hyperbolic:
    """phi(r) = sinh(s r)/s with s = sqrt(|K|)."""

    def __init__(self, K=-1.0):
        if not K < 0:
            raise ConfigurationError(f"hyperbolic family needs K < 0, got {K}")
        self.K = float(K)
        self.s = math.sqrt(-self.K)

    def values(self, r):
        s = self.s
        return np.sinh(s * r) / s, np.cosh(s * r), s * np.sinh(s * r)

    def dddphi0(self):
        return self.s**2

    def dphi_minus_one(self, r):
        return 2.0 * np.sinh(0.5 * self.s * r) ** 2

    def dphi_over_phi(self, r):
        s = self.s
        with np.errstate(divide="ignore"):
            return s / np.tanh(s * r)

    def ddphi_over_phi(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.s**2)

    def log_phi(self, r):
        s = self.s
        return s * r + np.log(-np.expm1(-2.0 * s * r)) - math.log(2.0 * s)

    def phi_integral(self, r):
        return 2.0 * np.sinh(0.5 * self.s * r) ** 2 / self.s**2

    def asymptotic_ratios(self):
        # limits of (phi'/phi, phi''/phi) as r -> infinity
        return self.s, self.s**2


class _Perturbed:
    """phi(r) = sinh(r) (1 + eta (1 - sech r)) = (1+eta) sinh r - eta tanh r."""

    def __init__(self, eta=0.1):
        eta = float(eta)
        if abs(eta) > 0.25:
            raise ConfigurationError(f"perturbed family needs |eta| <= 0.25, got {eta}")
        self.eta = eta

    def values(self, r):
        eta = self.eta
        th, se = np.tanh(r), _sech(r)
        phi = (1 + eta) * np.sinh(r) - eta * th
        dphi = (1 + eta) * np.cosh(r) - eta * se**2
        ddphi = (1 + eta) * np.sinh(r) + 2 * eta * se**2 * th
        return phi, dphi, ddphi

    def dddphi0(self):
        return 1.0 + 3.0 * self.eta

    def dphi_minus_one(self, r):
        return (1 + self.eta) * 2.0 * np.sinh(0.5 * r) ** 2 + self.eta * np.tanh(r) ** 2

    # exp(-r)-scaled brackets: phi = e^r * _b0, phi' = e^r * _b1, phi'' = e^r * _b2
    def _brackets(self, r):
        r = np.asarray(r, dtype=float)
        eta = self.eta
        e = np.exp(-r)
        th, se = np.tanh(r), _sech(r)
        b0 = -(1 + eta) * np.expm1(-2 * r) / 2 - eta * th * e
        b1 = (1 + eta) * (1 + e * e) / 2 - eta * se**2 * e
        b2 = -(1 + eta) * np.expm1(-2 * r) / 2 + 2 * eta * se**2 * th * e
        return b0, b1, b2

    def dphi_over_phi(self, r):
        b0, b1, _ = self._brackets(r)
        with np.errstate(divide="ignore"):
            return b1 / b0

    def ddphi_over_phi(self, r):
        r = np.asarray(r, dtype=float)
        b0, _, b2 = self._brackets(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = b2 / b0
        return np.where(r == 0, self.dddphi0(), out)

    def log_phi(self, r):
        b0, _, _ = self._brackets(r)
        return np.asarray(r, dtype=float) + np.log(b0)

    def phi_integral(self, r):
        eta = self.eta
        return (1 + eta) * 2.0 * np.sinh(0.5 * r) ** 2 - eta * np.log(np.cosh(r))

    def asymptotic_ratios(self):
        return 1.0, 1.0


class _Euclidean:
    """phi(r) = r; flat sanity model (not negatively curved)."""

    def values(self, r):
        r = np.asarray(r, dtype=float)
        return r.copy(), np.ones_like(r), np.zeros_like(r)

    def dddphi0(self):
        return 0.0

    def dphi_minus_one(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def dphi_over_phi(self, r):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(r, dtype=float)

    def ddphi_over_phi(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def log_phi(self, r):
        with np.errstate(divide="ignore"):
            return np.log(r)

    def phi_integral(self, r):
        return 0.5 * np.asarray(r, dtype=float) ** 2

    def asymptotic_ratios(self):
        return 0.0, 0.0


_FAMILIES: dict[str, Callable] = {
    "hyperbolic": _Hyperbolic,
    "perturbed": _Perturbed,
    "euclidean": _Euclidean,
}


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray


@dataclass(frozen=True)
class WarpedModel:
    """Warped-product metric ``dr^2 + phi(r)^2 g_{S^{n-1}}``.

    ``a_sq`` and ``b_sq`` are the measured pinching constants
    ``-a_sq <= Ric <= -b_sq``; ``None`` means the model has not been
    certified yet (see :func:`certify`).
    """

    family: str
    n: int = 2
    params: tuple = ()
    a_sq: float | None = None
    b_sq: float | None = None
    warping: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigurationError(f"unknown warping family {self.family!r}")
        if self.n < 2:
            raise ConfigurationError("dimension must be >= 2")
        object.__setattr__(self, "warping", _FAMILIES[self.family](**dict(self.params)))

    @property
    def certified(self) -> bool:
        return self.a_sq is not None and self.b_sq is not None

    @property
    def b(self) -> float:
        if self.b_sq is None:
            raise DomainError("model has no certified curvature bound")
        return math.sqrt(self.b_sq)

    @property
    def params_dict(self) -> dict:
        return dict(self.params)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n": self.n,
            "params": self.params_dict,
            "certified_a_sq": self.a_sq,
            "certified_b_sq": self.b_sq,
        }

    @classmethod
    def from_dict(cls, d) -> "WarpedModel":
        model = cls(d["family"], int(d.get("n", 2)), tuple(sorted(d.get("params", {}).items())))
        a_sq, b_sq = d.get("certified_a_sq"), d.get("certified_b_sq")
        if a_sq is None or b_sq is None:
            return certify(model)
        return replace(model, a_sq=float(a_sq), b_sq=float(b_sq))

    def key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    # thin vectorised accessors used by the solvers
    def phi(self, r):
        return self.warping.values(np.asarray(r, dtype=float))[0]

    def dphi_over_phi(self, r):
        return self.warping.dphi_over_phi(np.asarray(r, dtype=float))

    def phi_integral(self, r):
        return self.warping.phi_integral(np.asarray(r, dtype=float))

    def gaussian_curvature(self, r):
        """Sectional curvature of radial planes, ``-phi''/phi`` (finite at the pole)."""
        r = np.asarray(r, dtype=float)
        out = -self.warping.ddphi_over_phi(r)
        return np.where(r == 0, -self.warping.dddphi0(), out)


def hyperbolic(K=-1.0, n=2) -> WarpedModel:
    """Space form of constant curvature ``K`` (certified)."""
    return certify(WarpedModel("hyperbolic", n, (("K", float(K)),)))


def perturbed(eta=0.1, n=2) -> WarpedModel:
    return certify(WarpedModel("perturbed", n, (("eta", float(eta)),)))


def euclidean(n=2) -> WarpedModel:
    return certify(WarpedModel("euclidean", n))


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise DomainError("radius must be finite and >= 0")
    return r


def warping_eval(model: WarpedModel, r) -> RadialProfile:
    r = _check_radius(r)
    phi, dphi, ddphi = model.warping.values(r)
    return RadialProfile(r, phi, dphi, ddphi)


def ricci_eigenvalues(model: WarpedModel, r):
    """Radial and tangential Ricci eigenvalues at radius ``r``.

    radial = -(n-1) phi''/phi, tangential = -(n-2)(phi'^2 - 1)/phi^2 - phi''/phi.
    At the pole both reduce to -(n-1) phi'''(0).
    """
    r = _check_radius(r)
    w, n = model.warping, model.n
    dd = w.ddphi_over_phi(r)
    radial = -(n - 1) * dd
    if n == 2:
        tangential = -dd
    else:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            phi, dphi, _ = w.values(np.minimum(r, _LARGE_R))
            near = w.dphi_minus_one(r) * (dphi + 1.0) / phi**2
            far = w.dphi_over_phi(r) ** 2 - np.exp(-2.0 * w.log_phi(r))
        q = np.where(r <= _LARGE_R, near, far)
        # (phi'^2 - 1) / phi^2 -> phi'''(0) at the pole; phi^2 underflows for tiny r
        q = np.where(r < _SMALL_R, w.dddphi0(), q)
        tangential = -(n - 2) * q - dd
    at_pole = -(n - 1) * w.dddphi0()
    radial = np.where(r == 0, at_pole, radial)
    tangential = np.where(r == 0, at_pole, tangential)
    if not (np.all(np.isfinite(radial)) and np.all(np.isfinite(tangential))):
        raise FloatingPointError("non-finite curvature")
    if radial.ndim == 0:
        return float(radial), float(tangential)
    return radial, tangential


def certify(model: WarpedModel, r_max=40.0, samples=20000) -> WarpedModel:
    """Measure ``a_sq``/``b_sq`` by scanning both Ricci eigenvalues.

    The scan covers ``samples`` radii in ``[0, r_max]`` plus the family's
    limit as r -> infinity, so the bounds are global for families whose
    curvature is monotone past ``r_max``.
    """
    r = np.linspace(0.0, r_max, samples)
    radial, tangential = ricci_eigenvalues(model, r)
    _, dd_inf = model.warping.asymptotic_ratios()
    d_inf, _ = model.warping.asymptotic_ratios()
    n = model.n
    limit = [-(n - 1) * dd_inf, -(n - 2) * d_inf**2 - dd_inf]
    eig = np.concatenate([radial, tangential, limit])
    a_sq = float(-eig.min())
    b_sq = float(max(-eig.max(), 0.0))
    return replace(model, a_sq=a_sq, b_sq=b_sq)


def unit_sphere_area(n) -> float:
    """Area of the unit (n-1)-sphere."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def sphere_area(model: WarpedModel, r):
    r = _check_radius(r)
    return unit_sphere_area(model.n) * model.phi(r) ** (model.n - 1)


def log_sphere_area(model: WarpedModel, r):
    return math.log(unit_sphere_area(model.n)) + (model.n - 1) * model.warping.log_phi(r)


def laplacian_radial(model: WarpedModel, r, u):
    """Second-order finite-difference Laplacian of a radial function.

    ``r`` must be uniform with at least 4 samples.  Interior points use
    central differences, the ends use second-order one-sided stencils, and
    a sample at the pole uses ``Delta u(0) = n u''(0)`` with ``u'(0) = 0``.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.size < 4 or u.shape != r.shape:
        raise ConfigurationError("need at least 4 radial samples matching u")
    h = r[1] - r[0]
    if not np.allclose(np.diff(r), h, rtol=1e-9, atol=0):
        raise ConfigurationError("radial samples must be uniform")
    du = np.empty_like(u)
    d2u = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    d2u[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    du[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    du[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    d2u[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h**2
    d2u[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h**2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = d2u + (model.n - 1) * model.dphi_over_phi(r) * du
    if r[0] == 0.0:
        # even extension: u(-h) = u(h)
        out[0] = model.n * 2.0 * (u[1] - u[0]) / h**2
    return out


@dataclass(frozen=True)
class ComparisonReport:
    min_margin: float
    argmin_r: float
    passed: bool
    tolerance: float


def laplacian_comparison_check(model: WarpedModel, r_range, samples=10000, tol=1e-10):
    """Certify ``Delta r >= b coth(b r)`` on ``r_range = (r_lo, r_hi)``, ``r_lo > 0``."""
    lo, hi = r_range
    if lo <= 0:
        raise DomainError("comparison check needs r > 0")
    r = np.linspace(lo, hi, samples)
    b = model.b
    delta_r = (model.n - 1) * model.dphi_over_phi(r)
    margin = delta_r - b / np.tanh(b * r)
    k = int(np.argmin(margin))
    scale = np.maximum(1.0, np.abs(delta_r))
    ok = bool(np.all(margin >= -tol * scale))
    return ComparisonReport(float(margin[k]), float(r[k]), ok, tol)
