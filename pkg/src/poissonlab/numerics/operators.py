"""Discrete Laplace-Beltrami operator on polar grids and the solves built on it.

The operator is stored in flux (finite-volume) form: a symmetric stiffness
matrix ``K`` (off-diagonals <= 0, zero row sums on interior rows) and a
diagonal of node volumes ``W``, so that ``Delta u = -W^{-1} K u``.  Zero
Dirichlet data on ``B_p(R)`` amounts to restricting ``K`` to the nodes
inside the ball.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from ..errors import ConfigurationError, SolverError
from .fields import ScalarField
from .grid import PolarGrid

RTOL = 1e-10
_FACTOR_CACHE_SIZE = 2


@dataclass(eq=False)
class SparseOperator:
    grid: PolarGrid
    stiffness: sp.csr_matrix = field(repr=False)
    weights: np.ndarray = field(repr=False)
    symmetric: bool = True
    _factors: OrderedDict = field(default_factory=OrderedDict, repr=False)

    @property
    def dimension(self):
        return self.stiffness.shape[0]

    @property
    def entries(self):
        """``(row, col, value)`` triplets of the stiffness matrix."""
        coo = self.stiffness.tocoo()
        return coo.row, coo.col, coo.data

    def apply(self, u):
        """Discrete Laplacian of a flat vector (meaningful on interior rows)."""
        return -(self.stiffness @ u) / self.weights

    def domain(self, radius):
        mask = self.grid.domain_mask(radius)
        return np.flatnonzero(mask)

    def factor(self, radius):
        """Cached sparse LU of the stiffness restricted to ``B_p(radius)``."""
        key = round(float(radius), 12)
        if key in self._factors:
            self._factors.move_to_end(key)
            return self._factors[key]
        idx = self.domain(radius)
        A = self.stiffness[idx][:, idx].tocsc()
        lu = splu(A, permc_spec="COLAMD")
        self._factors[key] = (idx, A, lu)
        while len(self._factors) > _FACTOR_CACHE_SIZE:
            self._factors.popitem(last=False)
        return self._factors[key]


def discrete_laplacian(grid: PolarGrid, model=None) -> SparseOperator:
    """Five-point flux-form Laplace-Beltrami operator.

    Couplings: centre to ring 1 through ``J(h/2) h_theta / h``; ring ``i`` to
    ``i+1`` through ``J((i+1/2)h) h_theta / h``; angular neighbours through
    ``h / (J h_theta)`` with J averaged across the face.
    """
    if model is not None and model.key() != grid.model_key:
        raise ConfigurationError("grid was built for a different model")
    nr, nt = grid.nr, grid.ntheta
    h, ht = grid.h_r, grid.h_theta
    N = grid.size
    idx = np.arange(1, N).reshape(nr, nt)  # ring i at row i-1
    rows, cols, vals = [], [], []

    c0 = grid.jac_half[0] * ht / h
    rows.append(np.zeros(nt, dtype=int))
    cols.append(idx[0])
    vals.append(c0)

    cr = grid.jac_half[1:nr] * ht / h  # faces between rings i and i+1, i = 1..nr-1
    rows.append(idx[:-1].ravel())
    cols.append(idx[1:].ravel())
    vals.append(cr.ravel())

    javg = 0.5 * (grid.jac[1:] + np.roll(grid.jac[1:], -1, axis=1))
    ca = h / (javg * ht)
    rows.append(idx.ravel())
    cols.append(np.roll(idx, -1, axis=1).ravel())
    vals.append(ca.ravel())

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    A = sp.coo_matrix((np.concatenate([v, v]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                      shape=(N, N)).tocsr()
    deg = np.asarray(A.sum(axis=1)).ravel()
    K = (sp.diags(deg) - A).tocsr()
    K.sum_duplicates()
    return SparseOperator(grid, K, grid.weights)


def _as_flat(grid, rhs):
    if isinstance(rhs, ScalarField):
        return rhs.flat
    rhs = np.asarray(rhs, dtype=float)
    return grid.flat(rhs) if rhs.shape == grid.shape else rhs


def solve_load(op: SparseOperator, load, domain_radius, tol=RTOL):
    """Solve ``K u = load`` on ``B_p(domain_radius)`` with u = 0 outside; returns flat u."""
    if not op.grid.has_radius(domain_radius):
        raise ConfigurationError(f"domain radius {domain_radius} is not an exhaustion radius")
    load = np.asarray(load, dtype=float)
    if not np.all(np.isfinite(load)):
        raise ConfigurationError("right-hand side must be finite")
    idx, A, lu = op.factor(domain_radius)
    b = load[idx]
    u = np.zeros(op.dimension)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return u
    x = lu.solve(b)
    res = np.linalg.norm(A @ x - b) / nb
    if res > tol:
        x = x + lu.solve(b - A @ x)  # one step of iterative refinement
        res = np.linalg.norm(A @ x - b) / nb
        if res > tol:
            raise SolverError("Dirichlet solve did not reach tolerance", res)
    u[idx] = x
    return u


def solve_dirichlet(op: SparseOperator, rhs, domain_radius, tol=RTOL) -> ScalarField:
    """Solve ``Delta u = rhs`` on ``B_p(domain_radius)``, ``u = 0`` on and outside its boundary."""
    f = _as_flat(op.grid, rhs)
    u = solve_load(op, -op.weights * f, domain_radius, tol)
    return ScalarField.from_flat(op.grid, u)


def discrete_delta(grid: PolarGrid) -> ScalarField:
    """Unit point mass at the centre node: ``1 / (centre cell volume)``."""
    vec = np.zeros(grid.size)
    vec[0] = 1.0 / grid.pole_volume
    return ScalarField.from_flat(grid, vec)


def smallest_eigenpair(op: SparseOperator, domain_radius, method="lanczos", tol=1e-12,
                       maxiter=5000):
    """Ground state of ``-Delta`` on ``B_p(domain_radius)`` with Dirichlet data.

    ``method="lanczos"`` runs shift-invert Lanczos (ARPACK) through the cached
    LU; ``method="inverse"`` is plain inverse iteration with Rayleigh quotients.
    Returns ``(value, field)`` with the field positive inside the ball and
    normalised to unit weighted L2 norm.
    """
    idx, A, lu = op.factor(domain_radius)
    w = op.weights[idx]
    n = idx.size
    if method == "lanczos":
        opinv = LinearOperator((n, n), matvec=lu.solve, dtype=float)
        try:
            vals, vecs = eigsh(A, k=1, M=sp.diags(w).tocsc(), sigma=0.0, which="LM", OPinv=opinv,
                               v0=np.ones(n), tol=tol, maxiter=maxiter)
        except Exception as exc:  # ARPACK non-convergence
            raise SolverError(f"eigensolver failed: {exc}") from exc
        v = vecs[:, 0]
    elif method == "inverse":
        v = np.ones(n)
        lam_old = np.inf
        for _ in range(maxiter):
            v = lu.solve(w * v)
            v /= np.sqrt(np.dot(w * v, v))
            lam = float(v @ (A @ v))
            if abs(lam - lam_old) <= tol * abs(lam):
                break
            lam_old = lam
        else:
            raise SolverError("inverse iteration hit the iteration cap")
    else:
        raise ConfigurationError(f"unknown eigen method {method!r}")
    if v.sum() < 0:
        v = -v
    v /= np.sqrt(np.dot(w * v, v))
    lam = float(v @ (A @ v))
    full = np.zeros(op.dimension)
    full[idx] = v
    return lam, ScalarField.from_flat(op.grid, full)


def radial_operator(grid: PolarGrid):
    """Restriction of :func:`discrete_laplacian` to rotation-invariant fields on a centred grid.

    Returns ``(K, W)`` acting on ring values ``0..nr``: tridiagonal stiffness
    and ring volumes.  Applied to ring values this reproduces the 2-D operator
    exactly, since angular differences vanish on radial data.
    """
    if not grid.centered:
        raise ConfigurationError("radial restriction needs a pole-centred grid")
    h, nr = grid.h_r, grid.nr
    ring_faces = 2 * np.pi * grid.jac_half[:, 0] / h  # faces i -> i+1, i = 0..nr-1
    W = np.concatenate([[grid.pole_volume], 2 * np.pi * grid.jac[1:, 0] * h])
    main = np.zeros(nr + 1)
    main[:-1] += ring_faces
    main[1:] += ring_faces
    K = sp.diags([main, -ring_faces, -ring_faces], [0, 1, -1], format="csr")
    return K, W
