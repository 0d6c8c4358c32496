"""Minimal Green's functions: radial quadrature, exhaustion kernels and their certificates.

Normalisation is ``Delta G = -delta``: every level set carries unit flux.  Kernels
live on a polar chart centred at the pole ``x``; the chart coordinate ``rho``
is exactly ``d(x, .)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ConstructionError, DomainError
from .geometry import log_sphere_area
from .levelsets import band_fraction, level_flux, node_gradient
from .numerics import ScalarField, adaptive_quadrature, build_pole_chart, discrete_laplacian, solve_load
from .numerics.operators import RTOL

MONOTONE_TOL = 1e-8
BOUNDARY_FRACTION = 0.1


@dataclass(eq=False)
class GreenKernel:
    """``G(x, .)`` sampled on the chart centred at ``x``.

    ``domain_radius`` is the radius of the Dirichlet ball ``B_p(R)`` (``inf``
    for kernels sampled from the radial quadrature).
    """

    grid: object
    values: ScalarField
    pole_radius: float
    domain_radius: float
    construction: str
    flux_norm: float = 1.0
    pole: int = 0
    harmonic_residual: float = 0.0
    truncation_estimate: float | None = None

    @property
    def v(self):
        return self.values.values

    @cached_property
    def gradient(self):
        return node_gradient(self.grid, self.v)

    @cached_property
    def grad_norm(self):
        g_rho, g_psi = self.gradient
        return np.hypot(g_rho, g_psi)

    @cached_property
    def inside(self):
        """2-D mask of nodes strictly inside the Dirichlet ball (all nodes if untruncated)."""
        if math.isinf(self.domain_radius):
            m = np.ones(self.grid.shape, dtype=bool)
            m[-1] = False
            return m
        return self.grid.unflat(self.grid.domain_mask(self.domain_radius))

    @property
    def rho2d(self):
        return np.broadcast_to(self.grid.rho[:, None], self.grid.shape)

    def working_mask(self, exclusion=0.0, boundary_fraction=BOUNDARY_FRACTION):
        """Interior nodes at distance ``>= exclusion`` from the pole, away from the truncation."""
        m = self.inside & (self.rho2d >= exclusion - 1e-9)
        if math.isinf(self.domain_radius):
            m &= self.rho2d <= (1.0 - boundary_fraction) * self.grid.rho_max
        else:
            m &= self.grid.base_r <= (1.0 - boundary_fraction) * self.domain_radius
        m[0, 1:] = False
        return m

    def ring_values(self, d):
        """Values on the geodesic circle ``d(x, .) = d`` (linear in rho between rings)."""
        k = d / self.grid.h_r
        i = int(math.floor(k + 1e-9))
        t = k - i
        if i < 1 or i >= self.grid.nr:
            raise DomainError(f"distance {d} outside the chart")
        if t < 1e-9:
            return self.v[i].copy()
        return (1 - t) * self.v[i] + t * self.v[i + 1]

    def offpole_range(self):
        m = self.inside & (self.rho2d >= 2 * self.grid.h_r)
        m[0] = False
        vals = self.v[m]
        return float(vals.min()), float(vals.max())


# ---------------------------------------------------------------- radial route

def radial_green(model, r, tol=1e-14):
    """``G(r) = int_r^inf ds / A(s)`` with ``A`` the geodesic sphere area."""
    scalar = np.ndim(r) == 0
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rs <= 0):
        raise DomainError("radial Green's function needs r > 0")
    f = lambda s: np.exp(-log_sphere_area(model, s))  # noqa: E731
    out = np.array([adaptive_quadrature(f, float(x), math.inf, tol=tol) for x in rs])
    return float(out[0]) if scalar else out


def radial_green_derivative(model, r):
    """``G'(r) = -1 / A(r)``."""
    return -np.exp(-log_sphere_area(model, np.asarray(r, dtype=float)))


def radial_kernel(model, grid):
    """Radial quadrature sampled on a pole-centred grid (the centre takes ``G(h/4)``)."""
    if not grid.centered:
        raise ConfigurationError("radial kernels live on pole-centred grids")
    rho = grid.rho
    g = np.empty(rho.size)
    g[1:] = radial_green(model, rho[1:])
    g[0] = radial_green(model, 0.25 * grid.h_r)
    vals = np.repeat(g[:, None], grid.ntheta, axis=1)
    return GreenKernel(grid, ScalarField(grid, vals), 0.0, math.inf, "radial-quadrature")


# ------------------------------------------------------------ exhaustion route

def green_chart(model, pole_radius, domain_radii, h=0.02, ntheta=128, margin=1.0):
    """Chart centred at the point at distance ``pole_radius`` covering ``B_p(max R)``."""
    domain_radii = sorted(float(R) for R in domain_radii)
    rho_max = domain_radii[-1] + pole_radius + margin
    nr = int(math.ceil(rho_max / h - 1e-9))
    return build_pole_chart(model, pole_radius, nr * h, nr, ntheta, domain_radii)


def exhaustion_green(grid, model, pole=None, R_list=None, tol=RTOL):
    """Dirichlet Green's functions of ``B_p(R_i)`` with pole at the chart centre.

    Solves ``K G_i = e_x`` (unit point load) per radius.  Every member must be
    positive inside its ball and the sequence nondecreasing; the last member
    carries the truncation estimate ``max |G_k - G_{k-1}|``.
    """
    if pole is not None and abs(float(pole) - grid.center_radius) > 1e-9:
        raise ConfigurationError("pole radius does not match the chart centre")
    radii = tuple(grid.exhaustion_radii if R_list is None else R_list)
    if not radii:
        raise ConfigurationError("no exhaustion radii")
    if grid.center_radius >= radii[0]:
        raise ConfigurationError("pole must lie strictly inside the smallest ball")
    op = discrete_laplacian(grid, model)
    load = np.zeros(grid.size)
    load[0] = 1.0
    rho = grid.rho_flat
    kernels, prev = [], None
    try:
        for R in radii:
            u = solve_load(op, load, R, tol)
            mask = grid.domain_mask(R)
            if np.any(u[mask] <= 0):
                raise ConstructionError(f"kernel on B_p({R}) is not positive")
            if prev is not None and np.min(u - prev) < -MONOTONE_TOL:
                raise ConstructionError(f"exhaustion not monotone at R={R}: {np.min(u - prev):.3e}")
            resid = op.stiffness @ u - load
            off = mask & (rho > 2 * grid.h_r + 1e-12)
            harm = float(np.max(np.abs(resid[off]))) if off.any() else 0.0
            trunc = None if prev is None else float(np.max(np.abs(u - prev)))
            kernels.append(GreenKernel(grid, ScalarField.from_flat(grid, u), grid.center_radius,
                                       float(R), f"exhaustion(R={R:g})", harmonic_residual=harm,
                                       truncation_estimate=trunc))
            prev = u
    finally:
        op._factors.clear()
    return kernels


def kernel_at(model, pole_radius, R, h=0.02, ntheta=128):
    """Single exhaustion kernel on ``B_p(R)`` with pole at distance ``pole_radius``."""
    grid = green_chart(model, pole_radius, [R], h, ntheta)
    return exhaustion_green(grid, model, pole_radius)[-1]


# ------------------------------------------------------------- level-set flux

def flux_on_level_set(kernel: GreenKernel, s):
    """``int_{G = s} |grad G|`` over the marching-squares contour."""
    lo, hi = kernel.offpole_range()
    if not lo < s < hi:
        raise DomainError(f"level {s} outside the off-pole range ({lo:.3e}, {hi:.3e})")
    v = np.where(kernel.inside, kernel.v, 0.0)
    return level_flux(kernel.grid, v, s)


def default_thresholds(kernel: GreenKernel, count=5):
    """Geometric thresholds from ``G`` at distance 0.5 down to 20x the far-field level.

    On a tight domain (pole close to the truncation) the margin drops to 2x.
    """
    s_hi = float(kernel.ring_values(0.5).min())
    far = kernel.inside & ~kernel.working_mask()
    far[0] = False
    far_max = float(kernel.v[far].max()) if far.any() else 5e-6 * s_hi
    s_lo = 20.0 * far_max
    if not s_lo < 0.5 * s_hi:
        s_lo = 2.0 * far_max
    if not s_lo < 0.5 * s_hi:
        raise DomainError("kernel domain too small for a threshold ladder")
    return np.geomspace(s_hi, s_lo, count)


@dataclass(frozen=True)
class FluxStats:
    thresholds: tuple
    fluxes: tuple
    mean: float
    cv: float

    def to_dict(self):
        return {"thresholds": list(self.thresholds), "fluxes": list(self.fluxes), "mean": self.mean,
                "cv": self.cv, "invariant": "flux independent of level (cv < 0.05)"}


def flux_stats(kernel, thresholds=None, count=5) -> FluxStats:
    s = default_thresholds(kernel, count) if thresholds is None else np.asarray(thresholds, float)
    fl = np.array([flux_on_level_set(kernel, x) for x in s])
    mean = float(fl.mean())
    return FluxStats(tuple(map(float, s)), tuple(map(float, fl)), mean, float(fl.std() / mean))


def levelset_flux_bound(kernel, thresholds=None):
    """Largest sampled level-set flux."""
    return max(flux_stats(kernel, thresholds).fluxes)


def fit_exponential_envelope(radii, values):
    """Smallest ``(C, b)`` with ``b = max(fitted slope, 0)`` and ``values <= C e^{b r}``."""
    r = np.asarray(radii, float)
    y = np.log(np.asarray(values, float))
    slope = float(np.polyfit(r, y, 1)[0]) if r.size >= 2 else 0.0
    b = max(slope, 0.0)
    C = float(np.exp(np.max(y - b * r)))
    return C, b


# --------------------------------------------------------------- annulus decay

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    radii: tuple
    integrals: tuple
    bound: float | None
    passed: bool

    def to_dict(self):
        return {"slope": self.slope, "radii": list(self.radii), "integrals": list(self.integrals),
                "bound": self.bound, "passed": self.passed,
                "invariant": "slope of -log int_{R<d<R+1} G^2 >= 2 sqrt(lambda_1) - 10%"}


def annulus_integral(kernel, R):
    """``int_{R <= d(x,.) <= R+1} G^2`` with half weights on rings lying on either sphere."""
    g = kernel.grid
    rho = kernel.rho2d
    tol = 1e-6 * g.h_r
    w = g.weights_2d * ((rho > R + tol) & (rho < R + 1 - tol))
    w = w + 0.5 * g.weights_2d * ((np.abs(rho - R) <= tol) | (np.abs(rho - R - 1) <= tol))
    w[0, 1:] = 0.0
    return float(np.sum(w * np.where(kernel.inside, kernel.v, 0.0) ** 2))


def annulus_l2_decay(kernel, R_list, lambda1=None, tol=0.1) -> DecayFit:
    R_list = [float(R) for R in R_list]
    reach = max(R_list) + 1 + kernel.pole_radius
    if reach >= kernel.domain_radius or max(R_list) + 1 > kernel.grid.rho_max * (1 - BOUNDARY_FRACTION):
        raise DomainError("annuli reach the truncation boundary")
    I = np.array([annulus_integral(kernel, R) for R in R_list])
    if np.any(I <= 0):
        raise DomainError("non-positive annulus integral")
    slope, intercept = np.polyfit(R_list, -np.log(I), 1)
    bound = None if lambda1 is None else 2 * math.sqrt(lambda1)
    passed = bound is None or slope >= bound * (1 - tol)
    return DecayFit(float(slope), float(intercept), tuple(R_list), tuple(map(float, I)), bound,
                    bool(passed))


# ------------------------------------------------------------------- co-area

@dataclass(frozen=True)
class CoareaReport:
    lhs: float
    rhs: float
    flux: float
    rel_error: float

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "flux": self.flux, "rel_error": self.rel_error,
                "invariant": "int_{L(de,e)} |grad G|^2/G = flux * (-log d), rel error < 0.08"}


def band_integral(kernel, lo, hi, q):
    """``int_{L(lo, hi)} q`` with sub-cell threshold clamping (2-D arrays)."""
    v = np.where(kernel.inside, kernel.v, 0.0)
    frac = band_fraction(kernel.grid, v, lo, hi)
    frac[0, 1:] = 0.0
    w = kernel.grid.weights_2d * frac
    return float(np.sum(w * q)), float(np.sum(w))


def coarea_identity_check(kernel, delta, eps) -> CoareaReport:
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    q = np.zeros(kernel.grid.shape)
    ok = kernel.inside & (kernel.v > 0)
    q[ok] = kernel.grad_norm[ok] ** 2 / kernel.v[ok]
    q[0] = 0.0
    lhs, vol = band_integral(kernel, delta * eps, eps, q)
    if vol <= 0:
        raise DomainError("empty band")
    flux = flux_on_level_set(kernel, eps * math.sqrt(delta))
    rhs = flux * (-math.log(delta))
    return CoareaReport(lhs, rhs, flux, abs(lhs - rhs) / rhs)


# ---------------------------------------------------------- pointwise bounds

@dataclass(frozen=True)
class BoundsFit:
    """``A^{-1} e^{-B r(x)} <= G(x, .) <= A e^{B r(x)}`` on ``d(x, .) = 1``."""

    A: float
    B: float
    slope_upper: float
    slope_lower: float
    residual: float
    pole_radii: tuple
    ring_min: tuple
    ring_max: tuple
    passed: bool

    def to_dict(self):
        return {"A": self.A, "B": self.B, "slope_upper": self.slope_upper,
                "slope_lower": self.slope_lower, "residual": self.residual,
                "pole_radii": list(self.pole_radii), "ring_min": list(self.ring_min),
                "ring_max": list(self.ring_max), "passed": self.passed,
                "invariant": "log-linear fit of ring extrema in r(x), residual < 0.1"}


def fit_pointwise_bounds(kernels, residual_tol=0.1) -> BoundsFit:
    r = np.array([k.pole_radius for k in kernels], float)
    for k in kernels:
        if k.domain_radius - k.pole_radius < 2:
            raise DomainError(f"pole at r={k.pole_radius} is within 2 of the truncation")
    lo = np.array([k.ring_values(1.0).min() for k in kernels])
    hi = np.array([k.ring_values(1.0).max() for k in kernels])
    if np.any(lo <= 0):
        raise ConstructionError("kernel not positive on the unit sphere")
    yu, yl = np.log(hi), -np.log(lo)
    if r.size >= 2 and np.ptp(r) > 0:
        pu, pl = np.polyfit(r, yu, 1), np.polyfit(r, yl, 1)
        res = max(np.sqrt(np.mean((np.polyval(pu, r) - yu) ** 2)) / np.mean(np.abs(yu)),
                  np.sqrt(np.mean((np.polyval(pl, r) - yl) ** 2)) / np.mean(np.abs(yl)))
        su, sl = float(pu[0]), float(pl[0])
    else:
        su = sl = res = 0.0
    B = max(su, sl, 0.0)
    logA = max(np.max(yu - B * r), np.max(yl - B * r))
    A = math.exp(logA) * (1 + 1e-9)
    passed = bool(np.isfinite(B) and np.isfinite(A) and res < residual_tol)
    return BoundsFit(A, B, su, sl, float(res), tuple(map(float, r)), tuple(map(float, lo)),
                     tuple(map(float, hi)), passed)


def pointwise_bounds_scan(model, pole_radii, R, h=0.02, ntheta=128):
    """Exhaustion kernels for every pole radius and the fitted ``(A, B)``."""
    kernels = [kernel_at(model, rx, R, h, ntheta) for rx in pole_radii]
    return fit_pointwise_bounds(kernels), kernels


# ---------------------------------------------------------- gradient / envelope

@dataclass(frozen=True)
class GradientReport:
    sup: float
    p99: float
    argmax_distance: float
    passed: bool

    def to_dict(self):
        return {"sup": self.sup, "p99": self.p99, "argmax_distance": self.argmax_distance,
                "passed": self.passed, "invariant": "sup |grad G|/G finite off B_x(1)"}


def gradient_estimate_check(kernel, exclusion=1.0, boundary_fraction=BOUNDARY_FRACTION):
    """``|grad G| / G`` outside ``B_x(exclusion)``, away from the truncation."""
    if exclusion < 2 * kernel.grid.h_r - 1e-12:
        raise DomainError("exclusion must cover at least two grid cells")
    m = kernel.working_mask(exclusion, boundary_fraction)
    ratio = kernel.grad_norm[m] / kernel.v[m]
    k = int(np.argmax(ratio))
    sup = float(ratio[k])
    return GradientReport(sup, float(np.percentile(ratio, 99)), float(kernel.rho2d[m][k]),
                          bool(np.isfinite(sup)))


@dataclass(frozen=True)
class EnvelopeReport:
    margin: float
    argmin_distance: float
    violations: int
    tight: bool
    passed: bool

    def to_dict(self):
        return {"margin": self.margin, "argmin_distance": self.argmin_distance,
                "violations": self.violations, "tight": self.tight, "passed": self.passed,
                "invariant": "log G + log A + B r(x) + C0 d >= 0 for d >= 1"}


def lower_envelope_check(kernel, A, B, C0, tight=False, tol=1e-12,
                         boundary_fraction=BOUNDARY_FRACTION) -> EnvelopeReport:
    """Margin of ``G(x,z) >= A^{-1} e^{-B r(x) - C0 d(x,z)}`` over ``d(x,z) >= 1``.

    ``tight=True`` uses ``d - 1`` in place of ``d`` (the envelope then touches
    the unit sphere).
    """
    m = kernel.working_mask(1.0, boundary_fraction)
    d = kernel.rho2d[m]
    margin = np.log(kernel.v[m]) + math.log(A) + B * kernel.pole_radius + C0 * (d - 1.0 if tight else d)
    k = int(np.argmin(margin))
    viol = int(np.sum(margin < -tol))
    return EnvelopeReport(float(margin[k]), float(d[k]), viol, tight, viol == 0)


# ----------------------------------------------------------- superlevel sets

@dataclass(frozen=True)
class SuperlevelReport:
    mass: float
    theta: float
    violations: int
    sublevel_violations: int

    def to_dict(self):
        return {"mass": self.mass, "theta": self.theta, "violations": self.violations,
                "sublevel_violations": self.sublevel_violations,
                "invariant": "L(A e^{Br}, inf) in B_x(1); L(0, A^-1 e^{-Br}) outside B_x(1)"}


def superlevel_mass(kernel, theta, A=None, B=None) -> SuperlevelReport:
    """``int_{G > theta} G`` plus the inclusion counts when ``(A, B)`` are given."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    mass, _ = band_integral(kernel, theta, math.inf, np.where(kernel.inside, kernel.v, 0.0))
    viol = sub = 0
    if A is not None:
        up = A * math.exp(B * kernel.pole_radius)
        m = kernel.inside.copy()
        m[0, 1:] = False
        rho = kernel.rho2d
        viol = int(np.sum(m & (kernel.v > up) & (rho >= 1.0 - 1e-9)))
        sub = int(np.sum(m & (kernel.v < 1.0 / up) & (rho <= 1.0 + 1e-9)))
    return SuperlevelReport(mass, float(theta), viol, sub)


# ------------------------------------------------------------------ symmetry

@dataclass(frozen=True)
class SymmetryReport:
    g_xy: float
    g_yx: float
    rel_diff: float

    def to_dict(self):
        return {"g_xy": self.g_xy, "g_yx": self.g_yx, "rel_diff": self.rel_diff,
                "invariant": "G(x,y) = G(y,x) within 2%"}


def _value_towards(kernel, other_radius, d):
    """Value at distance ``d`` along the ray from the pole towards/away from ``p``."""
    vals = kernel.ring_values(d)
    if kernel.pole_radius == 0 or other_radius > kernel.pole_radius:
        return float(vals[0])
    if kernel.grid.ntheta % 2:
        raise ConfigurationError("symmetry check needs an even ntheta")
    return float(vals[kernel.grid.ntheta // 2])


def symmetry_check(model, x_radius, y_radius, R, h=0.02, ntheta=128) -> SymmetryReport:
    """``G(x, y)`` vs ``G(y, x)`` for two points on one ray from ``p``, by two solves."""
    d = abs(y_radius - x_radius)
    kx = kernel_at(model, x_radius, R, h, ntheta)
    ky = kernel_at(model, y_radius, R, h, ntheta)
    gxy = _value_towards(kx, y_radius, d)
    gyx = _value_towards(ky, x_radius, d)
    return SymmetryReport(gxy, gyx, abs(gxy - gyx) / max(gxy, gyx))


# -------------------------------------------------------------------- report

@dataclass
class GreenReport:
    pole_radius: float
    flux_stats: FluxStats
    decay: DecayFit | None
    coarea: CoareaReport
    bounds: dict
    inclusion_violations: int
    sublevel_violations: int
    envelope: EnvelopeReport | None = None
    truncation_estimate: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "pole_radius": self.pole_radius,
            "flux_stats": self.flux_stats.to_dict(),
            "decay_exponent": None if self.decay is None else self.decay.slope,
            "decay": None if self.decay is None else self.decay.to_dict(),
            "coarea_error": self.coarea.rel_error,
            "coarea": self.coarea.to_dict(),
            "bounds": self.bounds,
            "inclusion_violations": self.inclusion_violations,
            "sublevel_violations": self.sublevel_violations,
            "envelope": None if self.envelope is None else self.envelope.to_dict(),
            "truncation_estimate": self.truncation_estimate,
            **self.extra,
        }
