import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poissonlab import poisson as P
from poissonlab.errors import ConfigurationError, DomainError
from poissonlab.geometry import hyperbolic
from poissonlab.numerics import RadialGrid, ScalarField, build_polar_grid

R_EVAL = np.linspace(0.0, 40.0, 4001)


@pytest.fixture(scope="module")
def powerlaw_solution(H2):
    return P.solve_radial(H2, P.powerlaw_source(1.0), R_EVAL)


@pytest.fixture(scope="module")
def ring_grid(H2):
    return build_polar_grid(H2, 12.0, 600, 32, exhaustion_radii=[6.0, 9.0, 12.0])


def _field(r, u):
    return P.PoissonSolution(ScalarField(RadialGrid(r), u), "test", 0.0)


# ------------------------------------------------------------------- sources

def test_parse_source_families(H2):
    assert P.parse_source("powerlaw:eps=2").eps == 2.0
    assert P.parse_source("bump:radius=3,amp=2")(0.0) == pytest.approx(2.0)
    assert P.parse_source("zero").C == 0.0
    assert P.parse_source("manufactured", H2).name == "manufactured"


@pytest.mark.parametrize("spec", ["cubic", "powerlaw:eps=x", "powerlaw:width=2", "manufactured"])
def test_parse_source_errors(spec):
    with pytest.raises(ConfigurationError):
        P.parse_source(spec)


def test_source_assertions():
    with pytest.raises(DomainError):
        P.powerlaw_source(0.0)
    with pytest.raises(ConfigurationError):
        P.DecayingSource(lambda r: 1 / (1 + np.asarray(r)), 1.0, 1.0)


# ------------------------------------------------------------------ radial route

def test_zero_source_gives_zero(H2, ring_grid):
    sol = P.solve_radial(H2, P.zero_source(), R_EVAL)
    assert np.all(sol.values == 0.0)
    assert all(np.all(s.values == 0.0) for s in P.solve_exhaustion(ring_grid, H2, P.zero_source()))


@pytest.mark.parametrize("model", [hyperbolic(), hyperbolic(-0.5), hyperbolic(n=3)])
def test_manufactured_solution_recovered(model):
    sol = P.solve_radial(model, P.manufactured_source(model), R_EVAL)
    assert np.max(np.abs(sol.values - P.manufactured_profile(R_EVAL)[0])) < 1e-6
    assert sol.residual < 1e-6


def test_powerlaw_solution_decays_like_power(powerlaw_solution):
    r, u = powerlaw_solution.r, powerlaw_solution.values
    sel = (r >= 5) & (r <= 15)
    w = r[sel] * np.abs(u[sel])
    assert np.all(u < 0)
    assert w.max() / w.min() < 1.5


def test_solve_radial_domain_checks(H2):
    with pytest.raises(DomainError):
        P.solve_radial(H2, P.powerlaw_source(), np.array([-1.0, 1.0]))


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity(ring_grid, a, b):
    f1, f2 = P.powerlaw_source(1.0), P.bump_source(2.0)
    combo = P.DecayingSource(lambda r: a * f1(r) + b * f2(r), abs(a) * f1.C + abs(b) * f2.C, 1.0)
    u1, u2, u = (P.radial_exhaustion(ring_grid, s)[-1] for s in (f1, f2, combo))
    np.testing.assert_allclose(u, a * u1 + b * u2, atol=1e-12 * (1 + np.abs(u).max()))


# ------------------------------------------------------------------- routes

def test_exhaustion_agrees_with_radial(H2, ring_grid):
    src = P.powerlaw_source(1.0)
    ref = P.solve_radial(H2, src, R_EVAL).profile
    sols = P.solve_exhaustion(ring_grid, H2, src)
    assert P.route_agreement(ref, sols[-1].values[:, 0], ring_grid.rho, 12.0) < 0.02
    d = sols[-1].extra["cauchy_differences"]
    assert len(d) == 2 and d[1] < d[0]
    ring = P.radial_exhaustion(ring_grid, src)[-1]
    np.testing.assert_allclose(ring, sols[-1].values[:, 0], atol=1e-10)


def test_green_integral_at_centre(H2, centre_kernel):
    src = P.powerlaw_source(1.0)
    prof = P.solve_radial(H2, src, R_EVAL).profile
    gi = P.solve_green_integral([centre_kernel], src)
    exact = float(prof(np.array(0.0)) - prof(np.array(12.0)))
    assert gi.values[0] == pytest.approx(exact, rel=0.01)
    with pytest.raises(ConfigurationError):
        P.solve_green_integral([centre_kernel], src, eval_poles=[1.0])


def test_domination(H2):
    g = build_polar_grid(H2, 8.0, 160, 32, exhaustion_radii=[4.0, 6.0, 8.0])
    rep = P.domination_check(g, H2, P.bump_source(2.0, amp=-1.0))
    assert rep["passed"] and rep["max_sup_u"] <= rep["majorant"]


# -------------------------------------------------------------- certificates

def test_barrier_h2():
    rep = P.barrier_check(hyperbolic(), 1.0)
    assert (rep.r0, rep.alpha) == (4.0, 0.5)
    # margin(r) = r^-3 (2 - r coth r + r/2) < 0 on [4, inf), tending to 0 from below
    margin = lambda r: (2 - r / math.tanh(r) + r / 2) / r ** 3  # noqa: E731
    assert margin(4.0) < 0
    assert rep.passed and rep.argmax_r == pytest.approx(200.0)
    assert rep.margin == pytest.approx(margin(200.0), rel=1e-9)
    near = P.barrier_check(hyperbolic(), 1.0, r_max=4.5, samples=2)
    assert near.margin == pytest.approx(max(margin(4.0), margin(4.5)), rel=1e-9)


@pytest.mark.parametrize("eps", [0.25, 0.5, 2.0, 4.0])
def test_barrier_holds_on_pinched_models(P2, eps):
    assert P.barrier_check(P2, eps).passed


def test_barrier_rejects_zero_eps(H2):
    with pytest.raises(DomainError):
        P.barrier_check(H2, 0.0)


def test_decay_certificate_manufactured(H2):
    sol = _field(R_EVAL, P.manufactured_profile(R_EVAL)[0])
    cert = P.decay_certificate(sol, 1.0, r0=1.0, reference=sol)
    assert cert.C_tilde == pytest.approx(math.sqrt(2), rel=1e-9)
    assert cert.argmax_r == pytest.approx(1.0)
    assert cert.passed and cert.change == 0.0


def test_decay_certificate_zero():
    cert = P.decay_certificate(_field(R_EVAL, np.zeros_like(R_EVAL)), 1.0)
    assert cert.C_tilde == 0.0 and cert.passed


def test_decay_certificate_powerlaw_stable(H2, powerlaw_solution):
    big = P.solve_radial(H2, P.powerlaw_source(1.0), np.linspace(0.0, 80.0, 8001))
    cert = P.decay_certificate(powerlaw_solution, 1.0, reference=big)
    assert cert.passed and cert.interior and cert.change < 0.1


@pytest.mark.parametrize("c", [0.0, 2.0, -3.5])
def test_growth_of_constant(c):
    cert = P.growth_certificate(_field(R_EVAL, np.full_like(R_EVAL, c)))
    assert cert.A == pytest.approx(1 + abs(c), rel=1e-9)
    assert cert.B == pytest.approx(0.0, abs=1e-12) and cert.passed


def test_growth_slope_of_known_profile():
    cert = P.growth_certificate(_field(R_EVAL, 0.5 * np.exp(0.3 * R_EVAL)))
    assert cert.B == pytest.approx(0.3, rel=0.10)


def test_growth_of_decaying_solution(powerlaw_solution):
    cert = P.growth_certificate(powerlaw_solution)
    assert cert.B <= 0.0 and cert.passed


# ------------------------------------------------------ level-set machinery

def test_m0_from_constants():
    assert P.m0_from_constants(1.0, 0.0, 1.0, 1.0) == 3
    assert P.m0_from_constants(math.e, 0.0, 0.5, 2.0) == 5
    assert P.m0_from_constants(1.0, 0.0, 2.0, 0.0) == 1


def test_levelset_estimate_bounded(centre_kernel):
    src = P.powerlaw_source(2.0)
    ratios = [P.levelset_estimate_check(centre_kernel, src, math.exp(-1), math.exp(-m)).ratio
              for m in range(6, 12)]
    assert all(r > 0 for r in ratios) and max(ratios) / min(ratios) <= 2.0
    with pytest.raises(DomainError):
        P.levelset_estimate_check(centre_kernel, src, 1.5, 1e-2)


def test_series_tail(centre_kernel):
    tail = P.series_tail_check(centre_kernel, P.powerlaw_source(2.0), 6, 1.4)
    assert tail.passed and tail.violations == 0
    assert all(a >= b for a, b in zip(tail.terms, tail.terms[1:]))
    assert np.all(np.diff(tail.partial_sums) > 0)
