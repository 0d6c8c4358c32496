import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poissonlab.errors import ConfigurationError, DivergenceError, StepSizeError
from poissonlab.ricciflow import (FlowConfig, FlowState, RadialFlowGrid, background, curvature_conformal,
                                  curvature_from_warping, flow_step, initial_profile, potential_check,
                                  run_flow, stable_dt)


@pytest.fixture(scope="module")
def rgrid():
    return RadialFlowGrid.build(background(), 12.0, 256)


@pytest.fixture(scope="module")
def gaussian_run():
    return run_flow(FlowConfig())


def _state(w, rgrid):
    return FlowState(0.0, w, curvature_conformal(w, rgrid), 0.0)


def test_background_requires_unit_scalar_curvature():
    assert background().b_sq == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        background(-1.0)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1.5, 1.5))
def test_constant_conformal_factor(rgrid, c):
    w = np.full(rgrid.rho.size, c)
    np.testing.assert_allclose(curvature_conformal(w, rgrid), -np.exp(-2 * c), rtol=1e-9)
    nxt = flow_step(_state(w, rgrid), 1e-3, rgrid)
    # w_t = (e^{-2c} - 1)/2 pushes w towards 0
    inner = nxt.w[: rgrid.rho.size // 2]
    assert np.all(np.sign(inner - c) == -np.sign(c)) or c == 0


def test_gauge_consistency_second_order():
    errs = []
    for nr in (256, 512):
        g = RadialFlowGrid.build(background(), 12.0, nr)
        w = 0.3 * np.exp(-g.rho ** 2)
        w[-1] = 0.0
        sel = (g.rho > 0.5) & (g.rho < 6.0)
        errs.append(np.max(np.abs(curvature_from_warping(w, g)[sel] - curvature_conformal(w, g)[sel])))
    assert errs[1] < 2e-3 and errs[0] / errs[1] > 3.5


def test_fixed_point_is_stationary(rgrid):
    w0 = np.zeros(rgrid.rho.size)
    for scheme, dt in (("semi-implicit", 0.05), ("explicit", stable_dt(w0, rgrid))):
        nxt = flow_step(_state(w0, rgrid), dt, rgrid, scheme)
        assert np.max(np.abs(nxt.w)) == 0.0 and np.max(np.abs(nxt.R + 1)) <= 1e-12


def test_explicit_step_is_first_order(rgrid):
    w0 = initial_profile(FlowConfig(), rgrid)
    dt = stable_dt(w0, rgrid)
    one = flow_step(_state(w0, rgrid), dt, rgrid, "explicit")
    half = flow_step(_state(w0, rgrid), dt / 2, rgrid, "explicit")
    two = flow_step(half, dt / 2, rgrid, "explicit")
    local = np.max(np.abs(one.w - two.w))
    assert local < 0.05 * np.max(np.abs(one.w - w0))


def test_explicit_step_bound(rgrid):
    w0 = np.zeros(rgrid.rho.size)
    with pytest.raises(StepSizeError):
        flow_step(_state(w0, rgrid), 10 * stable_dt(w0, rgrid), rgrid, "explicit")
    with pytest.raises(StepSizeError):
        flow_step(_state(w0, rgrid), 0.0, rgrid)
    with pytest.raises(ConfigurationError):
        flow_step(_state(w0, rgrid), 0.01, rgrid, "leapfrog")


def test_zero_profile_stays_hyperbolic():
    res = run_flow(FlowConfig(profile="zero", t_final=1.0, nr=128))
    assert res.final_sup_dev() <= 1e-12


def test_gaussian_converges(gaussian_run):
    assert gaussian_run.final_sup_dev(4.0) < 1e-3
    assert gaussian_run.final_sup_dev(2.0) < 1e-3
    assert gaussian_run.eventually_decreasing(4.0)
    rep = gaussian_run.report()
    assert rep["gauge_error_max"] < 1e-2 and set(rep["final_sup_dev"]) == {"B2", "B4"}
    header, rows = gaussian_run.csv_rows()
    assert header[0] == "t" and len(rows) == gaussian_run.times.size


def test_refinement_consistent(gaussian_run):
    fine = run_flow(FlowConfig().refined())
    a, b = gaussian_run.final_sup_dev(4.0), fine.final_sup_dev(4.0)
    assert abs(a - b) / max(a, b) < 0.25


def test_resolvent_profile_keeps_curvature_above_minus_one():
    res = run_flow(FlowConfig(profile="resolvent", t_final=5.0, nr=256, dt=0.02))
    assert res.min_dev[0] > -1e-12
    assert np.min(res.min_dev) > -1e-6


def test_potential_bounded():
    rep = potential_check(FlowConfig(nr=256))
    assert rep["passed"] and np.isfinite(rep["sup_u"])


def test_flow_guards():
    with pytest.raises(DivergenceError):
        run_flow(FlowConfig(amp=12.0, t_final=1.0, dt=0.05, nr=128))
    with pytest.raises(ConfigurationError):
        run_flow(FlowConfig(width=8.0, t_final=1.0, nr=128))
    with pytest.raises(ConfigurationError):
        run_flow(FlowConfig(profile="tophat", t_final=1.0, nr=128))
