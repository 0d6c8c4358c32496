"""Green's functions, Poisson solutions, spectral gaps and normalized Ricci flow on
rotationally symmetric manifolds of pinched negative curvature."""

__version__ = "0.1.0"
