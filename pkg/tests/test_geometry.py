import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from poissonlab.errors import ConfigurationError, DomainError
from poissonlab.geometry import (WarpedModel, certify, euclidean, hyperbolic, laplacian_comparison_check,
                                 laplacian_radial, perturbed, ricci_eigenvalues, sphere_area,
                                 unit_sphere_area, warping_eval)

from conftest import coth_half_log


def test_pole_conditions():
    p = warping_eval(hyperbolic(), 0.0)
    assert (float(p.phi), float(p.dphi), float(p.ddphi)) == (0.0, 1.0, 0.0)


@pytest.mark.parametrize("K, expected", [(-1.0, 1.1752011936438014), (-0.5, 1.085441641272607)])
def test_warping_closed_form(K, expected):
    assert float(warping_eval(hyperbolic(K), 1.0).phi) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("K", [-1.0, -0.5, -2.0])
def test_space_form_ricci(K):
    rad, tan = ricci_eigenvalues(hyperbolic(K), np.array([0.0, 0.3, 1.0, 7.0, 30.0]))
    np.testing.assert_allclose(rad, K, rtol=1e-12)
    np.testing.assert_allclose(tan, K, rtol=1e-12)


def test_h3_ricci_is_twice_curvature():
    rad, tan = ricci_eigenvalues(hyperbolic(-1.0, n=3), np.array([0.0, 1.0, 25.0, 40.0]))
    np.testing.assert_allclose(rad, -2.0, rtol=1e-12)
    np.testing.assert_allclose(tan, -2.0, rtol=1e-10)


def test_perturbed_certificate():
    m = perturbed(0.1)
    assert m.a_sq == pytest.approx(1.3, rel=1e-6)
    assert m.b_sq == pytest.approx(1.0, abs=1e-12)
    rad, tan = ricci_eigenvalues(m, 2.0)
    assert -m.a_sq <= rad <= -m.b_sq and -m.a_sq <= tan <= -m.b_sq


@settings(max_examples=60, deadline=None)
@given(eta=st.floats(0.01, 0.25), n=st.sampled_from([2, 3]), r=st.floats(0.0, 60.0))
def test_pinching_holds_everywhere(eta, n, r):
    m = perturbed(eta, n)
    rad, tan = ricci_eigenvalues(m, r)
    tol = 1e-9
    assert -m.a_sq - tol <= rad <= -m.b_sq + tol
    assert -m.a_sq - tol <= tan <= -m.b_sq + tol


def test_sphere_areas():
    assert float(sphere_area(hyperbolic(), 1.0)) == pytest.approx(2 * math.pi * math.sinh(1), rel=1e-13)
    assert float(sphere_area(hyperbolic(n=3), 1.0)) == pytest.approx(4 * math.pi * math.sinh(1) ** 2, rel=1e-13)
    r = 1e-6
    assert float(sphere_area(hyperbolic(), r)) == pytest.approx(2 * math.pi * r, rel=1e-9)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("model", [hyperbolic(), hyperbolic(-0.5), perturbed(0.1), perturbed(0.2, 3)])
def test_exponential_volume_growth(model):
    r = np.linspace(5.0, 30.0, 200)
    # Ric <= -b^2 means sectional curvature <= -b^2/(n-1)
    k = math.sqrt(model.b_sq / (model.n - 1))
    ratio = np.asarray(sphere_area(model, r)) / np.exp(k * (model.n - 1) * r)
    assert ratio.min() > 0.1 * ratio[0]


def test_radial_laplacian_of_green_is_second_order(H2):
    res = []
    for h in (4e-3, 2e-3, 1e-3):
        r = np.arange(0.5, 5.0 + h / 2, h)
        res.append(np.max(np.abs(laplacian_radial(H2, r, coth_half_log(r))[1:-1])))
    assert res[-1] < 1e-3
    assert math.log2(res[0] / res[1]) > 1.8 and math.log2(res[1] / res[2]) > 1.8


def test_radial_laplacian_symbolic_oracle(H2):
    s = sym.symbols("r", positive=True)
    u = (1 + s ** 2) ** sym.Rational(-1, 2)
    lap = sym.lambdify(s, sym.diff(u, s, 2) + sym.cosh(s) / sym.sinh(s) * sym.diff(u, s), "numpy")
    errs = []
    for h in (1e-2, 5e-3):
        r = np.arange(0.2, 6.0 + h / 2, h)
        errs.append(np.max(np.abs(laplacian_radial(H2, r, (1 + r * r) ** -0.5)[1:-1] - lap(r[1:-1]))))
    assert errs[1] < errs[0] / 3.5


def test_constant_is_harmonic(H2):
    r = np.linspace(0, 5, 101)
    np.testing.assert_allclose(laplacian_radial(H2, r, np.full_like(r, 3.0)), 0.0, atol=1e-12)


@pytest.mark.parametrize("model", [hyperbolic(), hyperbolic(-0.5)])
def test_comparison_is_equality_on_space_forms(model):
    rep = laplacian_comparison_check(model, (0.05, 30.0))
    assert rep.passed and abs(rep.min_margin) < 1e-9


def test_comparison_on_perturbed():
    assert laplacian_comparison_check(perturbed(0.1), (0.05, 30.0)).min_margin >= -1e-10


def test_model_errors():
    with pytest.raises(ConfigurationError):
        WarpedModel("sphere")
    with pytest.raises(ConfigurationError):
        WarpedModel("hyperbolic", 1, (("K", -1.0),))
    with pytest.raises(DomainError):
        warping_eval(hyperbolic(), -1.0)
    with pytest.raises(DomainError):
        WarpedModel("hyperbolic", 2, (("K", -1.0),)).b


def test_serialisation_round_trip():
    for m in (hyperbolic(-0.5), perturbed(0.1, 3), euclidean()):
        back = WarpedModel.from_dict(m.to_dict())
        assert back == m and back.key() == m.key()
    assert certify(WarpedModel("euclidean")).b_sq == 0.0
