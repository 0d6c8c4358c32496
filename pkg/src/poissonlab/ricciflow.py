"""Normalised Ricci flow ``dg/dt = -(R + 1) g`` on rotationally symmetric surfaces.

The metric is kept conformal to a background of scalar curvature ``R0 = -1``
(Gaussian curvature -1/2): ``g = e^{2w} g0``.  Then ``R = e^{-2w}(R0 - 2 Delta0 w)``
and the flow becomes the scalar equation

    w_t = e^{-2w} Delta0 w + (e^{-2w} - 1) / 2,

whose fixed point is ``w = 0``.  Radial data is evolved on the rings of a
pole-centred grid with ``w = 0`` on the outer ring.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .errors import ConfigurationError, DivergenceError, StepSizeError
from .geometry import hyperbolic
from .numerics import RadialGrid, ScalarField, build_polar_grid, radial_operator
from .poisson import (DecayingSource, PoissonSolution, barrier_parameters, decay_certificate,
                      solve_exhaustion)

CFL_SAFETY = 0.25
BLOWUP = 10.0


def background(K=-0.5):
    """Constant-curvature background; the flow's fixed point needs ``2K = -1``."""
    if abs(2 * K + 1) > 1e-12:
        raise ConfigurationError("background must have R0 = 2K = -1")
    return hyperbolic(K)


@dataclass(frozen=True)
class FlowConfig:
    background_K: float = -0.5
    profile: str = "gaussian"  # gaussian | resolvent | zero
    amp: float = 0.3
    center: float = 0.0
    width: float = 1.0
    eps: float = 1.0
    t_final: float = 20.0
    dt: float = 0.01
    r_max: float = 12.0
    nr: int = 512
    monitor_radii: tuple = (2.0, 4.0)
    scheme: str = "semi-implicit"  # semi-implicit | explicit
    samples: int = 200

    def refined(self):
        """Same run with ``dt`` and ``h`` halved."""
        return replace(self, dt=self.dt / 2, nr=self.nr * 2)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["monitor_radii"] = list(self.monitor_radii)
        return d


@dataclass(eq=False)
class RadialFlowGrid:
    """Ring data of a pole-centred polar grid plus its radial operator."""

    model: object
    rho: np.ndarray
    K: object = field(repr=False)
    W: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, model, r_max, nr):
        g = build_polar_grid(model, r_max, nr, 32, exhaustion_radii=[r_max])
        K, W = radial_operator(g)
        return cls(model, g.rho, K.tocsr(), W)

    @property
    def h(self):
        return self.rho[1] - self.rho[0]

    def laplacian(self, w):
        """Background Laplacian on rings ``0..nr-1``; the outer ring uses one-sided differences."""
        out = -(self.K @ w) / self.W
        r, h = self.rho[-4:], self.h
        u = w[-4:]
        d1 = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
        d2 = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h ** 2
        out[-1] = d2 + float(self.model.dphi_over_phi(r[-1])) * d1
        return out


@dataclass(frozen=True)
class FlowState:
    t: float
    w: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    sup_dev: float

    @property
    def max_w(self):
        return float(np.max(np.abs(self.w)))


def curvature_conformal(w, rgrid: RadialFlowGrid, R0=-1.0):
    """``R = e^{-2w}(R0 - 2 Delta0 w)``."""
    w = np.asarray(w, float)
    return np.exp(-2 * w) * (R0 - 2 * rgrid.laplacian(w))


def curvature_from_warping(w, rgrid: RadialFlowGrid):
    """Scalar curvature of ``e^{2w}(dr^2 + phi0^2 dtheta^2)`` from its own warping.

    With arclength ``s = int e^w dr`` and warping ``P = e^w phi0``,
    ``R = -2 P_ss / P`` where ``P_ss = e^{-w} d/dr(e^{-w} dP/dr)``.
    """
    r, w = rgrid.rho, np.asarray(w, float)
    P = np.exp(w) * rgrid.model.phi(r)
    Ps = np.exp(-w) * np.gradient(P, r, edge_order=2)
    Pss = np.exp(-w) * np.gradient(Ps, r, edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = -2 * Pss / P
    # at the pole use the conformal value by continuity (P vanishes there)
    R[0] = np.nan
    return R


def initial_profile(config: FlowConfig, rgrid: RadialFlowGrid):
    r = rgrid.rho
    if config.profile == "zero" or config.amp == 0:
        w = np.zeros_like(r)
    elif config.profile == "gaussian":
        w = config.amp * np.exp(-((r - config.center) / config.width) ** 2)
    elif config.profile == "resolvent":
        # w = a (1 - Delta0)^{-1} g with g > 0, so Delta0 w < w and R + 1 > 0 everywhere
        g = np.exp(-((r - config.center) / config.width) ** 2)
        n = r.size - 1
        A = (rgrid.K[:n, :n] + sp.diags(rgrid.W[:n])).tocsc()
        w = np.zeros_like(r)
        w[:n] = spsolve(A, rgrid.W[:n] * g[:n])
        w *= config.amp / np.max(np.abs(w))
    else:
        raise ConfigurationError(f"unknown initial profile {config.profile!r}")
    w[-1] = 0.0
    return w


def deviation_decay(R, r, eps):
    """Smallest ``C`` with ``|R + 1| <= C (1 + r)^(-1-eps)`` on the samples."""
    return float(np.max(np.abs(R + 1) * (1 + r) ** (1 + eps)))


def sup_deviation(state_R, r, radius):
    sel = r <= radius + 1e-12
    return float(np.max(np.abs(state_R[sel] + 1)))


def stable_dt(w, rgrid: RadialFlowGrid):
    """Explicit step bound: ``CFL_SAFETY / (e^{-2 min w} max_i 2 K_ii / W_i)``."""
    diag = rgrid.K.diagonal()
    return CFL_SAFETY / (math.exp(-2 * float(np.min(w))) * float(np.max(2 * diag / rgrid.W)))


def _explicit(w, dt, rgrid):
    return w + dt * (np.exp(-2 * w) * rgrid.laplacian(w) + 0.5 * np.expm1(-2 * w))


def _semi_implicit(w, dt, rgrid):
    """``(I + dt e^{-2w} W^{-1} K) w_new = w + dt expm1(-2w)/2`` on the interior rings."""
    n = w.size - 1
    K = rgrid.K
    c = dt * np.exp(-2 * w[:n]) / rgrid.W[:n]
    main = 1.0 + c * K.diagonal()[:n]
    upper = c[:-1] * K.diagonal(1)[: n - 1]
    lower = c[1:] * K.diagonal(-1)[: n - 1]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = main
    ab[2, :-1] = lower
    rhs = w[:n] + 0.5 * dt * np.expm1(-2 * w[:n])
    out = np.zeros_like(w)
    out[:n] = solve_banded((1, 1), ab, rhs)
    return out


def flow_step(state: FlowState, dt, rgrid: RadialFlowGrid, scheme="semi-implicit",
              monitor_radius=4.0) -> FlowState:
    """Advance ``w`` by one step and recompute ``R``."""
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    if scheme == "explicit":
        if dt > stable_dt(state.w, rgrid) * (1 + 1e-12):
            raise StepSizeError(f"dt={dt} exceeds the explicit stability bound {stable_dt(state.w, rgrid):.3e}")
        w = _explicit(state.w, dt, rgrid)
    elif scheme == "semi-implicit":
        w = _semi_implicit(state.w, dt, rgrid)
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    w[-1] = 0.0
    R = curvature_conformal(w, rgrid)
    return FlowState(state.t + dt, w, R, sup_deviation(R, rgrid.rho, monitor_radius))


@dataclass(eq=False)
class FlowResult:
    config: FlowConfig
    rgrid: RadialFlowGrid = field(repr=False)
    times: np.ndarray = field(repr=False)
    sup_dev: dict = field(repr=False)  # monitor radius -> array over sample times
    max_w: np.ndarray = field(repr=False)
    min_dev: np.ndarray = field(repr=False)  # min of R + 1 over the domain
    gauge_error: np.ndarray = field(repr=False)
    final: FlowState = field(repr=False)
    initial_decay_C: float = 0.0
    runtime: float = 0.0

    def final_sup_dev(self, radius=None):
        radius = max(self.config.monitor_radii) if radius is None else radius
        return float(self.sup_dev[radius][-1])

    def eventually_decreasing(self, radius):
        s = self.sup_dev[radius]
        tail = s[len(s) // 2:]
        return bool(np.all(np.diff(tail) <= 1e-15 + 1e-9 * tail[:-1]))

    def report(self):
        return {
            "config": self.config.to_dict(),
            "final_sup_dev": {f"B{r:g}": self.final_sup_dev(r) for r in self.config.monitor_radii},
            "eventually_decreasing": {f"B{r:g}": self.eventually_decreasing(r)
                                      for r in self.config.monitor_radii},
            "max_w_final": float(self.max_w[-1]),
            "min_deviation_initial": float(self.min_dev[0]),
            "min_deviation": float(np.min(self.min_dev)),
            "gauge_error_max": float(np.nanmax(self.gauge_error)),
            "initial_decay_C": self.initial_decay_C,
            "invariant": "sup |R+1| on monitor balls -> 0 (eventually decreasing, < 1e-3 at t_final)",
        }

    def csv_rows(self):
        radii = self.config.monitor_radii
        header = ["t"] + [f"sup_dev_B{r:g}" for r in radii] + ["max_w"]
        rows = [[t] + [self.sup_dev[r][k] for r in radii] + [self.max_w[k]]
                for k, t in enumerate(self.times)]
        return header, rows


def run_flow(config: FlowConfig) -> FlowResult:
    """Integrate the flow to ``t_final`` and record monitor statistics at ``samples`` times."""
    t_start = time.perf_counter()
    model = background(config.background_K)
    rgrid = RadialFlowGrid.build(model, config.r_max, config.nr)
    r = rgrid.rho
    w = initial_profile(config, rgrid)
    if np.max(np.abs(w[r >= 0.5 * config.r_max])) > 1e-3 * max(np.max(np.abs(w)), 1e-300):
        raise ConfigurationError("initial deviation must be concentrated in the inner half")
    R = curvature_conformal(w, rgrid)
    C0 = deviation_decay(R, r, config.eps)
    radii = tuple(float(x) for x in config.monitor_radii)
    state = FlowState(0.0, w, R, sup_deviation(R, r, max(radii)))
    nsteps = int(round(config.t_final / config.dt))
    every = max(1, nsteps // config.samples)
    times, dev, maxw, mind, gauge = [], {x: [] for x in radii}, [], [], []

    def record(s):
        times.append(s.t)
        for x in radii:
            dev[x].append(sup_deviation(s.R, r, x))
        maxw.append(s.max_w)
        mind.append(float(np.min(s.R[:-1] + 1)))
        Rw = curvature_from_warping(s.w, rgrid)
        inner = (r > 0.25) & (r < 0.9 * config.r_max)
        gauge.append(float(np.max(np.abs(Rw[inner] - s.R[inner]))))

    record(state)
    for k in range(1, nsteps + 1):
        state = flow_step(state, config.dt, rgrid, config.scheme, max(radii))
        if not np.all(np.isfinite(state.w)) or state.max_w > BLOWUP:
            raise DivergenceError(f"flow blew up at t={state.t:.4g} (sup|w|={state.max_w:.3g})")
        if k % every == 0 or k == nsteps:
            record(state)
    return FlowResult(config, rgrid, np.array(times), {x: np.array(v) for x, v in dev.items()},
                      np.array(maxw), np.array(mind), np.array(gauge), state, C0,
                      time.perf_counter() - t_start)


def potential_check(config: FlowConfig, ntheta=32):
    """Bounded potential for ``Delta_{g(0)} u = R(0) + 1`` by the exhaustion route.

    On the background this reads ``Delta0 u = e^{2w} (R + 1)``; the source is
    interpolated from ring data and vanishes outside the flow domain.
    """
    model = background(config.background_K)
    rgrid = RadialFlowGrid.build(model, config.r_max, config.nr)
    r = rgrid.rho
    w = initial_profile(config, rgrid)
    R = curvature_conformal(w, rgrid)
    f_ring = np.exp(2 * w) * (R + 1)
    f_ring[-1] = 0.0
    eps = config.eps

    def f(x):
        return np.interp(np.asarray(x, float), r, f_ring, right=0.0)

    # piecewise-linear data between rings is bounded by the larger end value
    pair = np.maximum(np.abs(f_ring[:-1]), np.abs(f_ring[1:]))
    C = max(float(np.max(pair * (1 + r[1:]) ** (1 + eps))), 1e-300) * (1 + 1e-9)
    src = DecayingSource(f, C, eps, "flow-deviation")
    R_max = config.r_max
    grid = build_polar_grid(model, R_max, config.nr, ntheta,
                            exhaustion_radii=[R_max / 3, 2 * R_max / 3, R_max])
    sols = solve_exhaustion(grid, model, src, strict=False)
    u = sols[-1]
    ring = ScalarField(RadialGrid(grid.rho), u.values[:, 0])
    r0, _ = barrier_parameters(model, eps)
    cert = decay_certificate(PoissonSolution(ring, "exhaustion", u.residual), eps, r0)
    sup_u = float(np.max(np.abs(u.values)))
    return {"sup_u": sup_u, "decay_certificate": cert.to_dict(), "source_C": C,
            "passed": bool(np.isfinite(sup_u) and cert.passed),
            "invariant": "bounded potential with Delta u = R + 1 and polynomial decay"}
