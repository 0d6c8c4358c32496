"""Poisson equation ``Delta u = f`` for decaying sources, by three routes, with certificates.

Routes
------
radial
    Variation of parameters for radial ``f``: ``(A u')' = A f`` with ``A`` the
    sphere area, normalised so that ``u(inf) = 0``.
green-integral
    ``u(x) = -int G(x, y) f(y) dy`` with exhaustion kernels.
exhaustion
    Dirichlet solves on ``B_p(R_i)``; the last member is the working solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.sparse.linalg import spsolve

from .errors import ConfigurationError, DomainError
from .geometry import laplacian_radial
from .green import band_integral
from .levelsets import band_fraction
from .numerics import RadialGrid, ScalarField, discrete_laplacian, solve_dirichlet
from .numerics.operators import radial_operator

BOUNDARY_FRACTION = 0.1


# ------------------------------------------------------------------- sources

@dataclass(frozen=True)
class DecayingSource:
    """Radial source with the certified bound ``|f(r)| <= C (1 + r)^(-1-eps)``."""

    f: object = field(repr=False, compare=False)
    C: float
    eps: float
    name: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError("decay exponent eps must be positive")
        r = np.concatenate([np.linspace(0.0, 50.0, 5001), np.geomspace(50.0, 1e5, 2000)])
        fr = np.asarray(self.f(r), dtype=float)
        if not np.all(np.isfinite(fr)):
            raise ConfigurationError("source must be finite")
        bound = self.C * (1.0 + r) ** (-1.0 - self.eps)
        if np.any(np.abs(fr) > bound * (1 + 1e-12) + 1e-300):
            raise ConfigurationError(f"source {self.name} violates its decay assertion")

    def __call__(self, r):
        return np.asarray(self.f(np.asarray(r, dtype=float)), dtype=float)

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params), "C": self.C, "eps": self.eps}


def powerlaw_source(eps=1.0, C=1.0):
    """``f(r) = C (1 + r)^(-1-eps)``."""
    return DecayingSource(lambda r: C * (1.0 + r) ** (-1.0 - eps), C, eps, "powerlaw",
                          (("C", C), ("eps", eps)))


def zero_source(eps=1.0):
    return DecayingSource(lambda r: np.zeros_like(np.asarray(r, float)), 0.0, eps, "zero")


def bump_source(radius=2.0, amp=1.0, eps=1.0):
    """Compactly supported ``amp (1 - (r/radius)^2)^2`` on ``r < radius``."""
    def f(r):
        s = np.clip(1.0 - (np.asarray(r, float) / radius) ** 2, 0.0, None)
        return amp * s ** 2
    C = abs(amp) * (1.0 + radius) ** (1.0 + eps)
    return DecayingSource(f, C, eps, "bump", (("amp", amp), ("radius", radius)))


def manufactured_profile(r):
    """``u*(r) = (1 + r^2)^(-1/2)`` and its first two derivatives."""
    r = np.asarray(r, float)
    q = 1.0 + r * r
    return q ** -0.5, -r * q ** -1.5, (2 * r * r - 1.0) * q ** -2.5


def manufactured_source(model):
    """``f = Delta u*`` for the manufactured profile; ``C`` is measured with ``eps = 1``."""
    def f(r):
        r = np.asarray(r, float)
        _, d1, d2 = manufactured_profile(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = d2 + (model.n - 1) * model.dphi_over_phi(r) * d1
        return np.where(r == 0, model.n * d2, out)
    r = np.concatenate([np.linspace(0.0, 50.0, 50001), np.geomspace(50.0, 1e5, 20000)])
    C = float(np.max(np.abs(f(r)) * (1.0 + r) ** 2)) * (1 + 1e-9)
    return DecayingSource(f, C, 1.0, "manufactured")


def parse_source(spec, model=None):
    """``"powerlaw:eps=1"``, ``"bump:radius=2,amp=1"``, ``"manufactured"``, ``"zero"``."""
    name, _, rest = spec.partition(":")
    kw = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        try:
            kw[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigurationError(f"bad source parameter {item!r}") from exc
    try:
        if name == "powerlaw":
            return powerlaw_source(**kw)
        if name == "bump":
            return bump_source(**kw)
        if name == "zero":
            return zero_source(**kw)
        if name == "manufactured":
            if model is None:
                raise ConfigurationError("manufactured source needs a model")
            return manufactured_source(model)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for source {name!r}: {kw}") from exc
    raise ConfigurationError(f"unknown source family {name!r}")


# ----------------------------------------------------------------- solutions

@dataclass(eq=False)
class PoissonSolution:
    u: ScalarField
    route: str
    residual: float
    growth_fit: tuple | None = None
    decay_fit: tuple | None = None
    profile: object = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    @property
    def r(self):
        return np.asarray(self.u.grid.base_r)

    @property
    def values(self):
        return self.u.values


def solve_radial(model, source: DecayingSource, r_eval=None, r_far=2000.0, rtol=1e-12):
    """Radial solution with ``u(inf) = 0``.

    ``v = u'`` solves ``v' = f - (n-1)(phi'/phi) v`` from the pole out to
    ``r_far``; beyond it the quasi-static expansion
    ``v ~ f/c - f'/c^2`` with ``c = (n-1) lim phi'/phi`` closes the tail.
    """
    if r_eval is None:
        r_eval = np.linspace(0.0, 20.0, 2001)
    r_eval = np.asarray(r_eval, float)
    if np.any(r_eval < 0) or np.any(r_eval > r_far):
        raise DomainError("evaluation radii must lie in [0, r_far]")
    n = model.n
    f0 = float(source(0.0))
    r0 = 1e-6

    def rhs(r, y):
        v = y[0]
        return [float(source(r)) - (n - 1) * float(model.dphi_over_phi(r)) * v, v]

    sol = solve_ivp(rhs, (r0, r_far), [f0 * r0 / n, 0.5 * f0 * r0 * r0 / n], method="DOP853",
                    rtol=rtol, atol=1e-15, dense_output=True)
    if not sol.success:
        raise ConfigurationError(f"radial integration failed: {sol.message}")
    c = (n - 1) * model.warping.asymptotic_ratios()[0]
    if f0 == 0 and np.all(source(np.linspace(0, r_far, 4001)) == 0):
        tail = 0.0
    else:
        h = 1e-4 * r_far
        df = float(source(r_far + h) - source(r_far - h)) / (2 * h)
        int_f = quad(lambda s: float(source(s)), r_far, math.inf, epsabs=1e-15, limit=200)[0]
        tail = int_f / c + float(source(r_far)) / c ** 2 - df / c ** 3
    W_inf = float(sol.sol(r_far)[1]) + tail

    def profile(r):
        r = np.asarray(r, float)
        rr = np.clip(r, r0, r_far)
        W = sol.sol(rr.ravel())[1].reshape(rr.shape)
        W = np.where(r < r0, 0.5 * f0 * r * r / n, W)
        return W - W_inf

    u = profile(r_eval)
    grid = RadialGrid(r_eval)
    res = radial_residual(model, source, profile, r_eval)
    return PoissonSolution(ScalarField(grid, u), "radial", res, profile=profile)


def radial_residual(model, source, profile, r_eval, h=None):
    """``max |Delta u - f|`` with a Richardson-extrapolated finite-difference Laplacian."""
    lo, hi = float(np.min(r_eval)), float(np.max(r_eval))
    h = h or 2e-3
    r = np.arange(lo, hi + 0.5 * h, h)
    if r.size < 8:
        return 0.0
    r2 = np.arange(lo, r[-1] + 0.25 * h, 0.5 * h)
    L1 = laplacian_radial(model, r, profile(r))
    L2 = laplacian_radial(model, r2, profile(r2))[::2][: r.size]
    L = (4 * L2 - L1) / 3
    inner = slice(2, -2)
    return float(np.max(np.abs(L[inner] - source(r[inner]))))


def solve_green_integral(kernels, source: DecayingSource, eval_poles=None):
    """``u(x) = -sum_y G(x, y) f(y) w(y)`` at the pole of every kernel."""
    if eval_poles is not None:
        have = [k.pole_radius for k in kernels]
        if len(eval_poles) != len(kernels) or any(abs(a - b) > 1e-9 for a, b in zip(eval_poles, have)):
            raise ConfigurationError("kernel/pole mismatch")
    vals = []
    for k in kernels:
        w = k.grid.weights_2d * k.inside
        w[0, 1:] = 0.0
        vals.append(-float(np.sum(k.v * source(k.grid.base_r) * w)))
    r = np.array([k.pole_radius for k in kernels])
    order = np.argsort(r)
    sol = PoissonSolution(ScalarField(RadialGrid(r[order]), np.array(vals)[order]), "green-integral",
                          float("nan"))
    sol.extra["domain_radii"] = [k.domain_radius for k in kernels]
    return sol


def solve_exhaustion(grid, model, source: DecayingSource, strict=True):
    """Dirichlet solutions ``u_i`` on every exhaustion ball with their Cauchy differences."""
    radii = grid.exhaustion_radii
    if not radii:
        raise ConfigurationError("grid has no exhaustion radii")
    op = discrete_laplacian(grid, model)
    f = source(grid.base_r)
    out, diffs, prev = [], [], None
    try:
        for R in radii:
            u = solve_dirichlet(op, f, R)
            mask = grid.unflat(grid.domain_mask(R))
            Lu = grid.unflat(op.apply(u.flat))
            res = float(np.max(np.abs(Lu - f)[mask])) if mask.any() else 0.0
            sol = PoissonSolution(u, "exhaustion", res)
            sol.extra["domain_radius"] = float(R)
            if prev is not None:
                diffs.append(float(np.max(np.abs(u.values - prev.values))))
            out.append(sol)
            prev = u
    finally:
        op._factors.clear()
    if strict and any(b > a * (1 + 1e-9) + 1e-15 for a, b in zip(diffs, diffs[1:])):
        raise ConfigurationError(f"Cauchy differences not decreasing {diffs}: truncation too small")
    for s in out:
        s.extra["cauchy_differences"] = diffs
    return out


def radial_exhaustion(grid, source: DecayingSource):
    """Exhaustion route restricted to radial data on a pole-centred grid (ring values)."""
    K, W = radial_operator(grid)
    f = source(grid.rho)
    out = []
    for R in grid.exhaustion_radii:
        m = grid.ring_index(R)
        u = np.zeros(grid.nr + 1)
        u[:m] = spsolve(K[:m, :m].tocsc(), -W[:m] * f[:m])
        out.append(u)
    return out


def domination_check(grid, model, source: DecayingSource):
    """``max_i max (|u_i| - v)`` with ``Delta v = -|f|`` on the largest ball (must be <= 0)."""
    sols = solve_exhaustion(grid, model, source, strict=False)
    absf = DecayingSource(lambda r: -np.abs(source(r)), source.C, source.eps, "neg-abs")
    v = solve_exhaustion(grid, model, absf, strict=False)
    excess = max(float(np.max(np.abs(s.values) - vv.values)) for s, vv in zip(sols, v))
    majorant = float(np.max(v[-1].values))
    return {"max_excess": excess, "majorant": majorant,
            "max_sup_u": max(float(np.max(np.abs(s.values))) for s in sols),
            "passed": excess <= 1e-12 * max(majorant, 1e-300),
            "invariant": "|u_i| <= v, Delta v = -|f| (maximum principle)"}


# -------------------------------------------------------------- certificates

@dataclass(frozen=True)
class BarrierReport:
    eps: float
    b: float
    r0: float
    alpha: float
    margin: float
    argmax_r: float
    passed: bool
    tolerance: float

    def to_dict(self):
        return {"eps": self.eps, "b": self.b, "r0": self.r0, "alpha": self.alpha,
                "margin": self.margin, "argmax_r": self.argmax_r, "passed": self.passed,
                "tolerance": self.tolerance,
                "invariant": "Delta r^-eps + alpha r^-(1+eps) <= tol on r >= r0"}


def barrier_parameters(model, eps):
    if not eps > 0:
        raise DomainError("eps must be positive")
    b = model.b
    return max(2 * (1 + eps) / b, 1.0), eps * b / 2


def barrier_check(model, eps, r_max=200.0, samples=20000, extra_radii=None, tol=1e-8):
    """``Delta(r^-eps) + alpha r^-(1+eps)`` on ``[r0, r_max]`` (and any extra grid radii)."""
    r0, alpha = barrier_parameters(model, eps)
    r = np.linspace(r0, max(r_max, r0 + 1.0), samples)
    if extra_radii is not None:
        extra = np.asarray(extra_radii, float).ravel()
        r = np.union1d(r, extra[extra >= r0])
    lap = eps * (eps + 1) * r ** (-eps - 2) - eps * r ** (-eps - 1) * (model.n - 1) * model.dphi_over_phi(r)
    val = lap + alpha * r ** (-1 - eps)
    k = int(np.argmax(val))
    return BarrierReport(float(eps), model.b, r0, alpha, float(val[k]), float(r[k]),
                         bool(np.all(val <= tol)), tol)


@dataclass(frozen=True)
class DecayCertificate:
    C_tilde: float
    eps: float
    argmax_r: float
    interior: bool
    stable: bool | None
    change: float | None
    passed: bool

    def to_dict(self):
        return {"C_tilde": self.C_tilde, "eps": self.eps, "argmax_r": self.argmax_r,
                "interior": self.interior, "stable": self.stable, "change": self.change,
                "passed": self.passed,
                "invariant": "sup_{r>=r0} (1+r)^eps |u| attained inside, stable under doubling (10%)"}


def _sup_weighted(solution, eps, r0, boundary_fraction):
    r = solution.r.ravel()
    u = np.abs(solution.values).ravel()
    r_top = r.max()
    sel = (r >= r0) & (r <= (1 - boundary_fraction) * r_top)
    if not sel.any():
        raise DomainError("no samples between r0 and the excluded boundary layer")
    vals = (1 + r[sel]) ** eps * u[sel]
    k = int(np.argmax(vals))
    return float(vals[k]), float(r[sel][k]), (1 - boundary_fraction) * r_top


def decay_certificate(solution, eps, r0=1.0, reference=None, boundary_fraction=BOUNDARY_FRACTION,
                      stability_tol=0.1) -> DecayCertificate:
    """``C~ = sup_{r >= r0} (1 + r)^eps |u|``; ``reference`` is the run on the doubled domain."""
    C, arg, edge = _sup_weighted(solution, eps, r0, boundary_fraction)
    interior = C == 0.0 or arg < edge - 1e-9
    stable = change = None
    if reference is not None:
        C2, _, _ = _sup_weighted(reference, eps, r0, boundary_fraction)
        change = abs(C2 - C) / max(C, C2) if max(C, C2) > 0 else 0.0
        stable = change < stability_tol
    passed = bool(np.isfinite(C) and interior and (stable is None or stable))
    return DecayCertificate(C, float(eps), arg, bool(interior), stable, change, passed)


@dataclass(frozen=True)
class GrowthCertificate:
    A: float
    B: float
    residual: float
    passed: bool

    def to_dict(self):
        return {"A": self.A, "B": self.B, "residual": self.residual, "passed": self.passed,
                "invariant": "|u| <= A e^{B r}, B from a fit of log(1+|u|) on the outer half"}


def growth_certificate(solution, boundary_fraction=BOUNDARY_FRACTION, residual_tol=0.1):
    r = solution.r.ravel()
    y = np.log1p(np.abs(solution.values).ravel())
    r_top = r.max()
    sel = (r >= 0.5 * r_top) & (r <= (1 - boundary_fraction) * r_top)
    if sel.sum() < 2:
        sel = r >= 0.5 * r_top
    B, c = np.polyfit(r[sel], y[sel], 1)
    resid = float(np.sqrt(np.mean((np.polyval([B, c], r[sel]) - y[sel]) ** 2)))
    A = float(np.exp(np.max(y - B * r)))
    return GrowthCertificate(A, float(B), resid, bool(np.isfinite(B) and resid < residual_tol))


# ---------------------------------------------------- level-set machinery

@dataclass(frozen=True)
class LevelsetEstimate:
    lhs: float
    sup_f: float
    log_factor: float
    ratio: float

    def to_dict(self):
        return {"lhs": self.lhs, "sup_f": self.sup_f, "log_factor": self.log_factor,
                "ratio": self.ratio}


def levelset_estimate_check(kernel, source, delta, eps_level) -> LevelsetEstimate:
    """``|int_{L(d e, e)} G f| / ((-log d) sup_band |f|)``."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    f = source(kernel.grid.base_r)
    lhs, vol = band_integral(kernel, delta * eps_level, eps_level, np.where(kernel.inside, kernel.v * f, 0.0))
    if vol <= 0:
        raise DomainError("empty band")
    frac = band_fraction(kernel.grid, np.where(kernel.inside, kernel.v, 0.0), delta * eps_level, eps_level)
    frac[0, 1:] = 0.0
    sup_f = float(np.max(np.abs(f)[frac > 0]))
    logf = -math.log(delta)
    ratio = abs(lhs) / (logf * sup_f) if sup_f > 0 else 0.0
    return LevelsetEstimate(abs(lhs), sup_f, logf, ratio)


def m0_from_constants(A, B, C0, pole_radius):
    """First admissible band index ``1 + max{2(B+C0) r + 2 log A, B r + log A}`` (rounded up)."""
    val = 1 + max(2 * (B + C0) * pole_radius + 2 * math.log(A), B * pole_radius + math.log(A))
    return int(math.ceil(val))


@dataclass(frozen=True)
class SeriesTail:
    m0: int
    terms: tuple
    partial_sums: tuple
    cauchy: float
    comparison: tuple
    violations: int
    passed: bool
    tolerance: float

    def to_dict(self):
        return {"m0": self.m0, "terms": list(self.terms), "partial_sums": list(self.partial_sums),
                "cauchy": self.cauchy, "comparison": list(self.comparison),
                "violations": self.violations, "passed": self.passed, "tolerance": self.tolerance,
                "invariant": "band sups summable; L(e^-(m+1), e^-m) outside B_p(m/(2 C0))"}


def series_tail_check(kernel, source, m0, C0, count=10, tol=1e-3) -> SeriesTail:
    """Partial sums of ``sup_{L(e^-(m+1), e^-m)} |f|`` for ``m = m0 .. m0+count``."""
    v = np.where(kernel.inside, kernel.v, 0.0)
    f = np.abs(source(kernel.grid.base_r))
    terms, viol = [], 0
    for m in range(m0, m0 + count + 1):
        frac = band_fraction(kernel.grid, v, math.exp(-(m + 1)), math.exp(-m))
        frac[0, 1:] = 0.0
        band = (frac > 0) & kernel.inside
        if not band.any():
            raise DomainError(f"band m={m} is empty on the kernel's grid")
        terms.append(float(f[band].max()))
        core = band & (v > math.exp(-(m + 1))) & (v < math.exp(-m))
        viol += int(np.sum(core & (kernel.grid.base_r < m / (2 * C0))))
    sums = np.cumsum(terms)
    cauchy = float(terms[-1])
    comparison = tuple(float(source.C / (1 + m / (2 * C0)) ** (1 + source.eps))
                       for m in range(m0, m0 + count + 1))
    return SeriesTail(m0, tuple(terms), tuple(map(float, sums)), cauchy, comparison, viol,
                      bool(cauchy < tol and viol == 0), tol)


# ------------------------------------------------------------ route agreement

def route_agreement(reference_profile, u_grid, r_grid, domain_radius, interior=0.5):
    """Max difference to ``u_ref(r) - u_ref(R)`` on ``r <= interior * R``, relative to its sup."""
    r = np.asarray(r_grid, float)
    sel = r <= interior * domain_radius
    ref = reference_profile(r[sel]) - reference_profile(np.array(domain_radius))
    scale = float(np.max(np.abs(ref)))
    if scale == 0:
        return float(np.max(np.abs(np.asarray(u_grid)[sel])))
    return float(np.max(np.abs(np.asarray(u_grid)[sel] - ref)) / scale)
