import numpy as np
import pytest

from poissonlab.errors import ConfigurationError, StepSizeError
from poissonlab.heat import ball_chart, ball_lambda1, green_from_heat, heat_evolve, l2_decay_check

# int_{B(1)} G_{B(1)} on H2 = int_0^1 log coth(r/2) sinh r dr - log coth(1/2) (cosh 1 - 1)
BALL_GREEN_MASS = 0.24022901391655505


@pytest.fixture(scope="module")
def traj(H2):
    return heat_evolve(ball_chart(H2, 0.0), H2)


@pytest.fixture(scope="module")
def traj_off(H2):
    return heat_evolve(ball_chart(H2, 3.0), H2)


def test_mass_starts_at_one_and_decreases(traj):
    m = traj.masses
    assert m[0] == pytest.approx(1.0, rel=1e-12)
    assert m[1] == pytest.approx(1.0, abs=1e-3)
    assert np.all(np.diff(m) <= 1e-12)
    assert traj.H.min() >= 0.0


def test_l2_rate_bounds(traj):
    rep = l2_decay_check(traj)
    assert rep.passed and rep.rate >= 0.5
    assert rep.rate == pytest.approx(rep.ball_rate, rel=0.10)
    assert np.isfinite(rep.sup_constant) and rep.sup_constant > 0
    assert rep.to_dict()["l2_rate"] == rep.rate


def test_ball_eigenvalue_exceeds_bottom_of_spectrum(traj):
    assert ball_lambda1(traj) > 0.25


def test_time_integral_is_ball_green(traj):
    hg = green_from_heat(traj)
    assert hg.mass == pytest.approx(BALL_GREEN_MASS, rel=0.03)
    assert hg.elliptic_mass == pytest.approx(BALL_GREEN_MASS, rel=0.01)
    assert hg.field_error < 0.03 and hg.tail_fraction < 0.1


def test_ball_green_mass_independent_of_centre(traj, traj_off):
    a, b = green_from_heat(traj).mass, green_from_heat(traj_off).mass
    assert abs(a - b) / max(a, b) < 0.05


def test_bad_steps_raise(H2):
    g = ball_chart(H2, 0.0, ntheta=32)
    with pytest.raises(StepSizeError):
        heat_evolve(g, H2, dt_early=-1e-3)
    with pytest.raises(StepSizeError):
        heat_evolve(g, H2, t_final=0.0)


def test_short_trajectory_rejected(H2):
    short = heat_evolve(ball_chart(H2, 0.0, ntheta=32), H2, t_final=2.0)
    with pytest.raises(ConfigurationError):
        l2_decay_check(short)
    with pytest.raises(ConfigurationError):
        green_from_heat(short, T_max=0.05)
