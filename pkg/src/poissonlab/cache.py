"""Versioned on-disk cache for exhaustion kernels.

Entries are ``.npz`` blobs named by the SHA-256 of (model, grid, pole,
domain radius, solver tolerance, code version).  A corrupt entry is dropped
with a warning and rebuilt.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .green import GreenKernel, exhaustion_green, green_chart
from .numerics import ScalarField
from .numerics.operators import RTOL

log = logging.getLogger(__name__)


def cache_key(model, grid, pole_radius, domain_radius, tol=RTOL, version=__version__):
    payload = {
        "model": model.key(),
        "grid": grid.key(),
        "pole": round(float(pole_radius), 12),
        "domain": round(float(domain_radius), 12),
        "tol": float(tol),
        "version": version,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class KernelCache:
    """Directory of cached kernel values; ``policy`` is ``use``, ``rebuild`` or ``off``."""

    def __init__(self, root, policy="use", version=__version__):
        if policy not in ("use", "rebuild", "off"):
            raise ValueError(f"unknown cache policy {policy!r}")
        self.root = Path(root)
        self.policy = policy
        self.version = version
        self.hits = 0
        self.misses = 0
        if policy != "off":
            self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key):
        return self.root / f"{key}.npz"

    def get(self, key):
        """Stored arrays for ``key`` or ``None``."""
        if self.policy != "use":
            return None
        path = self._path(key)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                out = {k: data[k] for k in data.files}
            if str(out.get("version")) != self.version:
                return None
            return out
        except Exception as exc:  # truncated or garbled blob
            log.warning("corrupt cache entry %s (%s); rebuilding", path.name, exc)
            path.unlink(missing_ok=True)
            return None

    def put(self, key, **arrays):
        if self.policy == "off":
            return
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".npz")
        os.close(fd)
        np.savez(tmp, version=np.array(self.version), **arrays)
        os.replace(tmp, self._path(key))

    def kernel(self, model, pole_radius, domain_radius, h=0.02, ntheta=128, tol=RTOL):
        """Exhaustion kernel on ``B_p(domain_radius)``, solved only on a miss."""
        grid = green_chart(model, pole_radius, [domain_radius], h, ntheta)
        key = cache_key(model, grid, pole_radius, domain_radius, tol, self.version)
        hit = self.get(key)
        if hit is not None:
            self.hits += 1
            return GreenKernel(grid, ScalarField(grid, hit["values"]), float(pole_radius),
                               float(domain_radius), f"exhaustion(R={domain_radius:g})",
                               harmonic_residual=float(hit["harmonic_residual"]))
        self.misses += 1
        k = exhaustion_green(grid, model, pole_radius, tol=tol)[-1]
        self.put(key, values=k.v, harmonic_residual=np.array(k.harmonic_residual))
        return k


class NullCache(KernelCache):
    def __init__(self):
        super().__init__(".", policy="off")
