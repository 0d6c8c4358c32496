"""Polar grids on warped-product surfaces.

Two kinds of grid share one data layout:

* the polar grid centred at the model's pole ``p``; its Jacobian is ``phi(rho)``;
* a geodesic polar chart centred at an off-centre point ``x``.  Radial lines
  are unit-speed geodesics leaving ``x``, so ``rho`` is exactly ``d(x, .)``
  and the metric stays diagonal, ``drho^2 + J(rho, psi)^2 dpsi^2``, with
  ``J`` the Jacobi field along each geodesic.

Node ``0`` is the (single) centre node; node ``(i, j)`` for ``i = 1..nr``
sits at ``rho = i h``, ``psi = j h_theta``.  Ring ``nr`` is the chart edge and is
never an unknown.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import ConfigurationError, DomainError
from ..geometry import WarpedModel

MIN_NR = 64
MIN_NTHETA = 32


@dataclass(eq=False)
class PolarGrid:
    rho_max: float
    nr: int
    ntheta: int
    exhaustion_radii: tuple
    center_radius: float
    jac: np.ndarray = field(repr=False)  # (nr+1, ntheta), J at nodes
    jac_half: np.ndarray = field(repr=False)  # (nr, ntheta), J at rho=(i+1/2)h
    base_r: np.ndarray = field(repr=False)  # distance to p of each node
    base_theta: np.ndarray = field(repr=False)
    pole_volume: float = 0.0
    model_key: str = ""

    @property
    def r_max(self):
        return self.rho_max

    @property
    def h_r(self):
        return self.rho_max / self.nr

    @property
    def h_theta(self):
        return 2.0 * math.pi / self.ntheta

    @property
    def shape(self):
        return (self.nr + 1, self.ntheta)

    @property
    def size(self):
        return 1 + self.nr * self.ntheta

    @property
    def centered(self):
        return self.center_radius == 0.0

    @property
    def rho(self):
        return np.arange(self.nr + 1) * self.h_r

    @property
    def theta(self):
        return np.arange(self.ntheta) * self.h_theta

    def flat(self, values):
        values = np.asarray(values)
        return np.concatenate([values[:1, 0], values[1:].ravel()])

    def unflat(self, vec):
        vec = np.asarray(vec)
        out = np.empty(self.shape, dtype=vec.dtype)
        out[0] = vec[0]
        out[1:] = vec[1:].reshape(self.nr, self.ntheta)
        return out

    @property
    def weights(self):
        """Per-node volume elements (flat layout)."""
        w = self.jac[1:] * self.h_r * self.h_theta
        return np.concatenate([[self.pole_volume], w.ravel()])

    @property
    def weights_2d(self):
        """Node volumes on the 2-D layout; the centre volume sits at [0, 0]."""
        w = self.jac * self.h_r * self.h_theta
        w[0] = 0.0
        w[0, 0] = self.pole_volume
        return w

    @property
    def rho_flat(self):
        return self.flat(np.broadcast_to(self.rho[:, None], self.shape))

    @property
    def base_r_flat(self):
        return self.flat(self.base_r)

    def ring_index(self, radius):
        k = radius / self.h_r
        if abs(k - round(k)) > 1e-6:
            raise ConfigurationError(f"radius {radius} is not on a grid ring (h={self.h_r})")
        return int(round(k))

    def domain_mask(self, radius):
        """Flat mask of the unknowns of the Dirichlet problem on ``B_p(radius)``."""
        tol = 1e-6 * self.h_r
        mask = self.base_r_flat < radius - tol
        ring = np.concatenate([[0], np.repeat(np.arange(1, self.nr + 1), self.ntheta)])
        if np.any(mask & (ring == self.nr)):
            raise ConfigurationError(f"B_p({radius}) reaches the edge of the chart")
        return mask

    def chart_ball_mask(self, radius):
        """Flat mask of the unknowns of the Dirichlet problem on ``B_x(radius)``, x the chart centre."""
        if radius >= self.rho_max - 0.5 * self.h_r:
            raise ConfigurationError(f"B_x({radius}) reaches the edge of the chart")
        return self.rho_flat < radius - 1e-6 * self.h_r

    def ball_weights(self, radius):
        """Flat node weights of ``B_p(radius)``; a ring lying on the sphere counts half."""
        tol = 1e-6 * self.h_r
        r = self.base_r_flat
        w = self.weights * (r < radius - tol)
        on = np.abs(r - radius) <= tol
        return w + 0.5 * self.weights * on

    def has_radius(self, radius):
        return any(abs(radius - R) <= 1e-9 * max(1.0, R) for R in self.exhaustion_radii)

    def key(self):
        h = hashlib.sha256()
        h.update(self.model_key.encode())
        h.update(repr((self.rho_max, self.nr, self.ntheta, self.center_radius,
                       tuple(float(R) for R in self.exhaustion_radii))).encode())
        return h.hexdigest()[:16]


def _snap_radii(radii, h, rho_max):
    out = []
    for R in radii:
        k = max(1, int(round(R / h)))
        out.append(k * h)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigurationError(f"exhaustion radii not strictly increasing after snapping: {out}")
    if out and out[-1] > rho_max + 1e-12:
        raise ConfigurationError("exhaustion radius beyond r_max")
    return tuple(out)


def _check_resolution(rho_max, nr, ntheta, model):
    if not rho_max > 0:
        raise ConfigurationError("r_max must be positive")
    if nr < MIN_NR or ntheta < MIN_NTHETA:
        raise ConfigurationError(f"resolution below minimum (nr >= {MIN_NR}, ntheta >= {MIN_NTHETA})")
    if model.n != 2:
        raise ConfigurationError("polar grids are two-dimensional; use the radial routes for n > 2")


def build_polar_grid(model: WarpedModel, r_max, nr, ntheta, exhaustion_count=4,
                     exhaustion_radii=None) -> PolarGrid:
    """Polar grid centred at the pole of ``model``.

    Exhaustion radii default to ``r_max * i / exhaustion_count`` and are
    snapped onto grid rings.
    """
    _check_resolution(r_max, nr, ntheta, model)
    h = r_max / nr
    if exhaustion_radii is None:
        exhaustion_radii = [r_max * i / exhaustion_count for i in range(1, exhaustion_count + 1)]
    radii = _snap_radii(exhaustion_radii, h, r_max)
    rho = np.arange(nr + 1) * h
    phi = model.phi(rho)
    phi_half = model.phi((np.arange(nr) + 0.5) * h)
    jac = np.repeat(phi[:, None], ntheta, axis=1)
    jac_half = np.repeat(phi_half[:, None], ntheta, axis=1)
    base_r = np.repeat(rho[:, None], ntheta, axis=1)
    base_theta = np.broadcast_to(np.arange(ntheta) * 2 * math.pi / ntheta, (nr + 1, ntheta)).copy()
    pole_volume = 2.0 * math.pi * float(model.phi_integral(0.5 * h))
    return PolarGrid(float(r_max), nr, ntheta, radii, 0.0, jac, jac_half, base_r, base_theta,
                     pole_volume, model.key())


def _geodesic_fan(model: WarpedModel, center_radius, rho_max, nr, ntheta):
    """Integrate the exponential map at ``x = (center_radius, 0)``.

    Returns J, base r and base theta sampled at ``rho = k h / 2`` for every
    direction, plus the cumulative integral of J (for the centre cell).
    """
    h = rho_max / nr
    psi = np.arange(ntheta) * 2 * math.pi / ntheta
    sin_psi = np.sin(psi)
    sin_psi[np.abs(sin_psi) < 1e-12] = 0.0
    c = float(model.phi(center_radius)) * sin_psi  # Clairaut constant phi^2 theta'
    m = ntheta

    def rhs(_, y):
        r, pr, th, J, dJ, _I = y.reshape(6, m)
        ra = np.abs(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_phi2 = np.where(c != 0.0, np.exp(-2.0 * model.warping.log_phi(ra)), 0.0)
            ratio = np.where(c != 0.0, model.dphi_over_phi(ra), 0.0)
        dpr = c * c * ratio * inv_phi2
        dth = c * inv_phi2
        K = model.gaussian_curvature(ra)
        return np.concatenate([pr, dpr, dth, dJ, -K * J, J])

    y0 = np.concatenate([
        np.full(m, float(center_radius)), np.cos(psi), np.zeros(m),
        np.zeros(m), np.ones(m), np.zeros(m),
    ])
    t_eval = np.arange(2 * nr + 1) * (0.5 * h)
    sol = solve_ivp(rhs, (0.0, t_eval[-1]), y0, method="DOP853", t_eval=t_eval,
                    rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise ConfigurationError(f"geodesic integration failed: {sol.message}")
    y = sol.y.reshape(6, m, -1).transpose(0, 2, 1)  # (var, rho, psi)
    r, th, J, I = y[0], y[2], y[3], y[5]
    th = np.where(r < 0, th + math.pi, th)
    return J, np.abs(r), np.mod(th, 2 * math.pi), I


def build_pole_chart(model: WarpedModel, center_radius, rho_max, nr, ntheta,
                     exhaustion_radii) -> PolarGrid:
    """Geodesic polar chart centred at the point at distance ``center_radius`` from p.

    ``exhaustion_radii`` are radii of balls ``B_p(R)`` (centred at the model
    pole); every such ball must fit inside the chart, ``R + center_radius < rho_max``.
    """
    if center_radius < 0:
        raise DomainError("center radius must be >= 0")
    if center_radius == 0:
        return build_polar_grid(model, rho_max, nr, ntheta, exhaustion_radii=exhaustion_radii)
    _check_resolution(rho_max, nr, ntheta, model)
    radii = tuple(float(R) for R in exhaustion_radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigurationError("exhaustion radii must be strictly increasing")
    if radii and radii[-1] + center_radius >= rho_max:
        raise ConfigurationError("chart too small for the largest exhaustion ball")
    if radii and center_radius >= radii[0]:
        raise ConfigurationError("pole must lie strictly inside the smallest exhaustion ball")
    J, r, th, I = _geodesic_fan(model, center_radius, rho_max, nr, ntheta)
    h_theta = 2 * math.pi / ntheta
    pole_volume = float(h_theta * I[1].sum())
    jac = J[0::2].copy()
    jac[0] = 0.0
    return PolarGrid(float(rho_max), nr, ntheta, radii, float(center_radius), jac, J[1::2].copy(),
                     r[0::2].copy(), th[0::2].copy(), pole_volume, model.key())
