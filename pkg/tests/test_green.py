import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poissonlab import green as G
from poissonlab.errors import ConfigurationError, DomainError
from poissonlab.geometry import hyperbolic
from poissonlab.numerics import ScalarField, build_polar_grid

from conftest import coth_half_log

G_H2_AT_1 = 0.12285756271158171      # log coth(1/2) / 2pi
G_H3_AT_1 = 0.024910556524700655     # (coth 1 - 1) / 4pi
SUPERLEVEL_AT_1 = 0.6594529591680367  # int_0^1 log coth(r/2) sinh r dr
RATIO_AT_2 = 1.0124075700753654      # 1 / (sinh 2 log coth 1)


def _scaled(kernel, c):
    return dataclasses.replace(kernel, values=ScalarField(kernel.grid, c * kernel.v))


@pytest.fixture(scope="module")
def h2_bounds(h2_pole_kernels):
    return G.fit_pointwise_bounds(h2_pole_kernels)


# ------------------------------------------------------------ radial oracles

def test_radial_closed_forms(H2):
    assert G.radial_green(H2, 1.0) == pytest.approx(G_H2_AT_1, rel=1e-10)
    assert G.radial_green(hyperbolic(n=3), 1.0) == pytest.approx(G_H3_AT_1, rel=1e-10)
    assert G.radial_green(H2, 10.0) == pytest.approx(math.exp(-10) / math.pi, rel=0.01)
    r = np.array([0.3, 2.0, 5.0])
    np.testing.assert_allclose(G.radial_green(H2, r), coth_half_log(r), rtol=1e-10)
    np.testing.assert_allclose(G.radial_green_derivative(H2, r), -1 / (2 * np.pi * np.sinh(r)), rtol=1e-12)


def test_radial_green_rejects_pole(H2):
    with pytest.raises(DomainError):
        G.radial_green(H2, 0.0)


# --------------------------------------------------------- exhaustion route

def test_centre_kernel_matches_radial(centre_kernel):
    k = centre_kernel
    sel = (k.grid.rho >= 0.2) & (k.grid.rho <= 6.0)
    rel = k.v[sel] / coth_half_log(k.grid.rho[sel])[:, None] - 1
    assert np.max(np.abs(rel)) < 0.01


def test_exhaustion_monotone_and_positive(H2):
    grid = G.green_chart(H2, 3.0, [5.0, 7.0, 9.0], 0.04, 64)
    ks = G.exhaustion_green(grid, H2, 3.0)
    for a, b in zip(ks, ks[1:]):
        assert np.min(b.values.flat - a.values.flat) >= -1e-8
    for k in ks:
        assert k.v[k.inside].min() > 0
        assert k.harmonic_residual < 1e-10
    assert ks[-1].truncation_estimate > 0


def test_exhaustion_rejects_bad_pole(H2):
    grid = G.green_chart(H2, 3.0, [5.0], 0.04, 64)
    with pytest.raises(ConfigurationError):
        G.exhaustion_green(grid, H2, 2.0)
    with pytest.raises(ConfigurationError):
        G.exhaustion_green(grid, H2, 3.0, R_list=[2.0])


def test_symmetry_off_centre(H2):
    rep = G.symmetry_check(H2, 3.0, 4.5, 10.0, 0.04, 64)
    assert rep.rel_diff < 0.02
    assert rep.g_xy == pytest.approx(float(coth_half_log(1.5)), rel=0.02)


# ---------------------------------------------------------------- level-set flux

def test_radial_flux_is_unit(radial_kernel):
    for s in (0.3, 1e-2, 1e-3):
        assert G.flux_on_level_set(radial_kernel, s) == pytest.approx(1.0, rel=0.02)
    assert G.levelset_flux_bound(radial_kernel) == pytest.approx(1.0, rel=0.02)


def test_off_centre_flux_two_levels(h2_pole_kernels):
    k = h2_pole_kernels[1]
    a, b = G.flux_on_level_set(k, 1e-2), G.flux_on_level_set(k, 1e-3)
    assert abs(a - b) / max(a, b) < 0.03


def test_flux_above_sup_raises(radial_kernel):
    with pytest.raises(DomainError):
        G.flux_on_level_set(radial_kernel, 2 * radial_kernel.v.max())


def test_flux_bound_homogeneous_on_h2(h2_pole_kernels):
    sups = [G.levelset_flux_bound(k) for k in h2_pole_kernels]
    assert max(sups) / min(sups) - 1 < 0.05
    assert all(G.flux_stats(k).cv < 0.05 for k in h2_pole_kernels)


def test_threshold_ladder_on_tight_domain(H2):
    k = G.kernel_at(H2, 5.0, 8.0, 0.04, 64)
    s = G.default_thresholds(k)
    assert s[0] > s[-1] > 0 and len(s) == 5


# ------------------------------------------------------------------- decay

def test_decay_slope_h2(radial_kernel):
    fit = G.annulus_l2_decay(radial_kernel, [3.0, 4.0, 5.0, 6.0, 7.0, 8.0], lambda1=0.25)
    assert fit.slope == pytest.approx(1.0, rel=0.05)
    assert fit.passed


def test_decay_slope_scaled_curvature():
    m = hyperbolic(-0.5)
    k = G.radial_kernel(m, build_polar_grid(m, 16.0, 800, 64))
    fit = G.annulus_l2_decay(k, [4.0, 6.0, 8.0, 10.0, 12.0], lambda1=0.125)
    assert fit.slope == pytest.approx(2 * math.sqrt(0.125), rel=0.10)


def test_decay_perturbed(p2_pole_kernels):
    fit = G.annulus_l2_decay(p2_pole_kernels[0], [2.0, 3.0, 4.0, 5.0, 6.0], lambda1=0.25)
    assert fit.passed


def test_decay_rejects_truncated_annuli(h2_pole_kernels):
    with pytest.raises(DomainError):
        G.annulus_l2_decay(h2_pole_kernels[-1], [6.0, 7.0, 8.0])


# ----------------------------------------------------------------- co-area

def test_coarea_radial(radial_kernel):
    assert G.coarea_identity_check(radial_kernel, 1 / math.e, 1e-2).rel_error < 0.05


def test_coarea_off_centre(h2_pole_kernels, p2_pole_kernels):
    for k in (h2_pole_kernels[1], p2_pole_kernels[2]):
        assert G.coarea_identity_check(k, 0.1, 1e-2).rel_error < 0.08


def test_coarea_thin_band_vanishes(radial_kernel):
    rep = G.coarea_identity_check(radial_kernel, 0.999, 1e-2)
    assert rep.rhs < 2e-3 and rep.lhs < 2e-3
    with pytest.raises(DomainError):
        G.coarea_identity_check(radial_kernel, 1.0, 1e-2)


# ---------------------------------------------------------- pointwise bounds

def test_bounds_homogeneous_on_h2(h2_bounds):
    assert h2_bounds.B == pytest.approx(0.0, abs=0.05)
    assert h2_bounds.A == pytest.approx(1 / G_H2_AT_1, rel=0.02)
    assert h2_bounds.passed and min(h2_bounds.ring_min) > 0
    np.testing.assert_allclose(h2_bounds.ring_min, G_H2_AT_1, rtol=0.02)


def test_bounds_perturbed(p2_pole_kernels):
    fit = G.fit_pointwise_bounds(p2_pole_kernels)
    assert fit.passed and fit.residual < 0.1
    assert np.isfinite(fit.A) and np.isfinite(fit.B)


def test_bounds_reject_pole_near_truncation(H2):
    with pytest.raises(DomainError):
        G.fit_pointwise_bounds([G.kernel_at(H2, 7.0, 8.0, 0.04, 64)])


# --------------------------------------------------------- gradient/envelope

def test_gradient_ratio_closed_form(radial_kernel):
    k = radial_kernel
    i2 = int(round(2.0 / k.grid.h_r))
    assert k.grad_norm[i2, 0] / k.v[i2, 0] == pytest.approx(RATIO_AT_2, rel=0.01)
    r = 10.0
    assert 1 / (math.sinh(r) * -math.log(math.tanh(r / 2))) == pytest.approx(1.0, abs=1e-4)
    rep = G.gradient_estimate_check(k, 1.0)
    assert rep.passed and 1.0 < rep.sup < 1.3


def test_gradient_check_needs_exclusion(radial_kernel):
    with pytest.raises(DomainError):
        G.gradient_estimate_check(radial_kernel, 0.5 * radial_kernel.grid.h_r)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(1e-3, 1e3))
def test_scaling_invariance(centre_kernel, c):
    k, ks = centre_kernel, _scaled(centre_kernel, c)
    assert G.gradient_estimate_check(ks, 1.0).sup == pytest.approx(G.gradient_estimate_check(k, 1.0).sup, rel=1e-9)
    a = G.lower_envelope_check(k, 8.0, 0.0, 1.4).margin
    b = G.lower_envelope_check(ks, 8.0 / c, 0.0, 1.4).margin
    assert b == pytest.approx(a, abs=1e-9)


def test_lower_envelope(h2_pole_kernels, h2_bounds):
    C0 = max(G.gradient_estimate_check(k, 1.0).p99 for k in h2_pole_kernels)
    for k in h2_pole_kernels:
        rep = G.lower_envelope_check(k, h2_bounds.A, h2_bounds.B, C0)
        assert rep.passed and rep.violations == 0
    tight = min(G.lower_envelope_check(k, h2_bounds.A, h2_bounds.B, C0, tight=True).margin
                for k in h2_pole_kernels)
    assert tight == pytest.approx(0.0, abs=0.02)


# ----------------------------------------------------------- superlevel sets

def test_superlevel_mass_oracle(radial_kernel):
    rep = G.superlevel_mass(radial_kernel, G_H2_AT_1)
    assert rep.mass == pytest.approx(SUPERLEVEL_AT_1, rel=0.02)
    assert G.superlevel_mass(radial_kernel, float(radial_kernel.v.max())).mass == 0.0
    with pytest.raises(DomainError):
        G.superlevel_mass(radial_kernel, 0.0)


def test_inclusions(h2_pole_kernels, p2_pole_kernels, h2_bounds):
    fit = G.fit_pointwise_bounds(p2_pole_kernels)
    for ks, b in ((h2_pole_kernels, h2_bounds), (p2_pole_kernels, fit)):
        for k in ks:
            rep = G.superlevel_mass(k, b.A * math.exp(b.B * k.pole_radius), b.A, b.B)
            assert rep.violations == 0 and rep.sublevel_violations == 0
