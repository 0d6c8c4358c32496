import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poissonlab.errors import ConfigurationError, DomainError
from poissonlab.geometry import euclidean, hyperbolic, laplacian_radial
from poissonlab.numerics import (adaptive_quadrature, build_polar_grid, discrete_delta,
                                 discrete_laplacian, radial_operator, smallest_eigenpair,
                                 solve_dirichlet, solve_load)
from poissonlab.poisson import manufactured_profile, manufactured_source

from conftest import coth_half_log

J01_SQ = 5.783185962946784  # first zero of J0, squared


@pytest.fixture(scope="module")
def small(H2):
    g = build_polar_grid(H2, 4.0, 64, 32, exhaustion_radii=[2.0, 3.0, 4.0])
    return g, discrete_laplacian(g, H2)


def test_exhaustion_split_and_ball_volume(H2):
    g = build_polar_grid(H2, 8.0, 512, 256, 4)
    assert g.exhaustion_radii == (2.0, 4.0, 6.0, 8.0)
    vol = float(g.ball_weights(2.0).sum())
    assert vol == pytest.approx(2 * math.pi * (math.cosh(2) - 1), rel=0.01)


def test_degenerate_grids(H2):
    with pytest.raises(ConfigurationError):
        build_polar_grid(H2, 0.0, 64, 32)
    with pytest.raises(ConfigurationError):
        build_polar_grid(H2, 4.0, 8, 32)


def test_constant_has_zero_laplacian(small):
    g, op = small
    lap = op.apply(np.full(g.size, 2.5))
    interior = g.rho_flat < g.r_max - 1e-9
    assert np.max(np.abs(lap[interior])) < 1e-10


def test_radial_field_matches_radial_laplacian(H2):
    errs = []
    for nr in (128, 256):
        g = build_polar_grid(H2, 4.0, nr, 32)
        op = discrete_laplacian(g, H2)
        lap = g.unflat(op.apply(g.flat((1 + g.base_r ** 2) ** -0.5)))[:, 0]
        ref = laplacian_radial(H2, g.rho, (1 + g.rho ** 2) ** -0.5)
        sel = (g.rho > 0.25) & (g.rho < 3.5)
        errs.append(np.max(np.abs(lap[sel] - ref[sel])))
    assert errs[1] < errs[0] / 3.0


def test_radial_operator_is_exact_restriction(H2):
    g = build_polar_grid(H2, 4.0, 64, 32)
    K, W = radial_operator(g)
    u = np.exp(-g.rho)
    op = discrete_laplacian(g, H2)
    full = g.unflat(op.stiffness @ g.flat(np.repeat(u[:, None], g.ntheta, axis=1)))
    ring = K @ u
    np.testing.assert_allclose(full[1:, 0] * g.ntheta, ring[1:], rtol=1e-10, atol=1e-12)


def test_zero_rhs_gives_zero(small):
    g, op = small
    assert np.all(solve_dirichlet(op, np.zeros(g.shape), 4.0).values == 0.0)


def test_delta_solution_matches_green(H2):
    g = build_polar_grid(H2, 8.0, 400, 128, exhaustion_radii=[8.0])
    op = discrete_laplacian(g, H2)
    u = solve_dirichlet(op, -discrete_delta(g).values, 8.0)
    sel = (g.rho >= 0.2) & (g.rho <= 6.0)
    exact = coth_half_log(g.rho[sel]) - coth_half_log(8.0)
    assert np.max(np.abs(u.values[sel, 0] / exact - 1)) < 0.01


def test_manufactured_second_order(H2):
    src = manufactured_source(H2)
    errs = []
    for nr in (64, 128, 256):
        g = build_polar_grid(H2, 8.0, nr, 32, exhaustion_radii=[8.0])
        u = solve_dirichlet(discrete_laplacian(g, H2), src(g.base_r), 8.0)
        exact = manufactured_profile(g.base_r)[0] - manufactured_profile(8.0)[0]
        errs.append(np.max(np.abs(u.values - exact)))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), R=st.sampled_from([2.0, 3.0, 4.0]))
def test_discrete_maximum_principle(small, seed, R):
    g, op = small
    rng = np.random.default_rng(seed)
    f = np.abs(rng.standard_normal(g.shape)) * (rng.random(g.shape) < 0.3)
    u = solve_dirichlet(op, -f, R)  # Delta u = -f <= 0 with zero boundary data
    assert u.values.min() >= -1e-12 * max(1.0, u.values.max())


def test_euclidean_disk_eigenvalue():
    m = euclidean()
    g = build_polar_grid(m, 1.0, 128, 64, exhaustion_radii=[1.0])
    lam, field = smallest_eigenpair(discrete_laplacian(g, m), 1.0)
    assert lam == pytest.approx(J01_SQ, rel=5e-3)
    inside = g.unflat(g.domain_mask(1.0))
    assert np.all(field.values[inside] > 0)


def test_eigenpair_residual_and_methods(small):
    g, op = small
    lam, field = smallest_eigenpair(op, 3.0)
    lam_inv, _ = smallest_eigenpair(op, 3.0, method="inverse")
    assert lam == pytest.approx(lam_inv, rel=1e-8)
    idx = op.domain(3.0)
    u = field.flat[idx]
    A = op.stiffness[idx][:, idx]
    r = A @ u - lam * op.weights[idx] * u
    assert np.linalg.norm(r) < 1e-8 * np.linalg.norm(A @ u)
    assert np.all(u > 0)


def test_eigenvalue_domain_monotonicity(small):
    g, op = small
    lams = [smallest_eigenpair(op, R)[0] for R in (2.0, 3.0, 4.0)]
    assert lams[0] > lams[1] > lams[2] > 0.25


def test_solve_load_rejects_unknown_radius(small):
    g, op = small
    with pytest.raises((ConfigurationError, DomainError)):
        solve_load(op, np.zeros(g.size), 100.0)


@pytest.mark.parametrize("f, a, b, exact", [
    (lambda s: np.exp(-s), 0.0, math.inf, 1.0),
    (lambda s: 1 / (2 * math.pi * np.sinh(s)), 1.0, math.inf, math.log(1 / math.tanh(0.5)) / (2 * math.pi)),
    (lambda s: 1 / (4 * math.pi * np.sinh(s) ** 2), 1.0, math.inf, (1 / math.tanh(1) - 1) / (4 * math.pi)),
])
def test_quadrature_oracles(f, a, b, exact):
    assert adaptive_quadrature(f, a, b, tol=1e-13) == pytest.approx(exact, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(coef=st.lists(st.floats(-5, 5), min_size=1, max_size=8),
       a=st.floats(-3, 3), w=st.floats(0.1, 5))
def test_quadrature_integrates_polynomials(coef, a, w):
    p = np.polynomial.Polynomial(coef)
    P = p.integ()
    exact = P(a + w) - P(a)
    got = adaptive_quadrature(p, a, a + w, tol=1e-12)
    assert got == pytest.approx(exact, rel=1e-9, abs=1e-9)
