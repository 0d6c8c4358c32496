"""Scalar fields sampled on grids, with optional decay metadata and CSV export."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(eq=False)
class RadialGrid:
    """Uniform 1-D radial samples (radial solutions, 3-D models)."""

    r: np.ndarray

    @property
    def shape(self):
        return self.r.shape

    @property
    def base_r(self):
        return self.r

    @property
    def base_theta(self):
        return np.zeros_like(self.r)


@dataclass(eq=False)
class ScalarField:
    """Values on a grid.

    ``decay = (C, exponent)`` asserts ``|value| <= C (1 + r)^-exponent`` with r
    the distance to the model pole; it is checked on construction.
    """

    grid: object
    values: np.ndarray
    decay: tuple | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.grid.shape):
            raise ConfigurationError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("field values must be finite")
        if self.decay is not None and not self.decay_holds():
            raise ConfigurationError(f"decay assertion {self.decay} violated by samples")

    @classmethod
    def from_flat(cls, grid, vec, decay=None):
        return cls(grid, grid.unflat(vec), decay)

    @property
    def flat(self):
        if hasattr(self.grid, "flat"):
            return self.grid.flat(self.values)
        return self.values

    def decay_holds(self, rtol=1e-12):
        C, p = self.decay
        bound = C * (1.0 + self.grid.base_r) ** (-p)
        return bool(np.all(np.abs(self.values) <= bound * (1 + rtol)))

    def to_csv(self, path):
        """Write ``r,theta,value`` rows (base-point coordinates); the centre node once."""
        r, th, v = self.grid.base_r, self.grid.base_theta, self.values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "value"])
            if v.ndim == 1:
                rows = zip(r, th, v)
            else:
                rows = [(r[0, 0], th[0, 0], v[0, 0])]
                rows += list(zip(r[1:].ravel(), th[1:].ravel(), v[1:].ravel()))
            for a, b, c in rows:
                w.writerow([f"{a:.12g}", f"{b:.12g}", f"{c:.12g}"])
