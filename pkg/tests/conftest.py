import numpy as np
import pytest

from poissonlab import green as G
from poissonlab.geometry import hyperbolic, perturbed
from poissonlab.numerics import build_polar_grid


@pytest.fixture(scope="session")
def H2():
    return hyperbolic()


@pytest.fixture(scope="session")
def P2():
    return perturbed(0.1)


@pytest.fixture(scope="session")
def centre_kernel(H2):
    """Exhaustion kernel of B_p(12) with pole at p (h = 0.02, 128 angles)."""
    return G.kernel_at(H2, 0.0, 12.0, 0.02, 128)


@pytest.fixture(scope="session")
def radial_kernel(H2):
    return G.radial_kernel(H2, build_polar_grid(H2, 12.0, 600, 64))


@pytest.fixture(scope="session")
def h2_pole_kernels(H2):
    return [G.kernel_at(H2, rx, 12.0, 0.04, 64) for rx in (2.0, 3.0, 4.0, 5.0)]


@pytest.fixture(scope="session")
def p2_pole_kernels(P2):
    return [G.kernel_at(P2, rx, 12.0, 0.04, 64) for rx in (2.0, 3.0, 4.0, 5.0)]


def coth_half_log(r):
    """(1/2pi) log coth(r/2), the Green's function of H2."""
    return -np.log(np.tanh(np.asarray(r, float) / 2)) / (2 * np.pi)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
