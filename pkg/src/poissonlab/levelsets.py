"""Level-set geometry on polar grids: contours, gradients, sub-cell band fractions."""
from __future__ import annotations

import numpy as np

from .errors import DomainError

# corner order a=(i,j), b=(i,j+1), c=(i+1,j+1), d=(i+1,j); edges ab=0, bc=1, cd=2, da=3
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))


def node_gradient(grid, values):
    """Metric gradient components ``(d_rho G, (1/J) d_psi G)`` at every node.

    Central differences; one-sided on the outer ring.  Row 0 (the centre) is
    left at zero.
    """
    v = np.asarray(values, dtype=float)
    h, ht = grid.h_r, grid.h_theta
    g_rho = np.zeros_like(v)
    g_rho[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    g_rho[-1] = (v[-1] - v[-2]) / h
    g_psi = np.zeros_like(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_psi[1:] = (np.roll(v[1:], -1, axis=1) - np.roll(v[1:], 1, axis=1)) / (2 * ht * grid.jac[1:])
    return g_rho, g_psi


def contour_segments(grid, values, s):
    """Piecewise-linear level curve ``{G = s}`` by marching squares on grid cells.

    Cells between rings ``i`` and ``i+1`` for ``i >= 1`` are processed (the
    centre fan is skipped).  Returns a dict with segment endpoints in
    ``(rho, psi)``, their metric lengths, and ``|grad G|`` at both endpoints.
    """
    v = np.asarray(values, dtype=float)
    h, ht = grid.h_r, grid.h_theta
    nr = grid.nr
    g_rho, g_psi = node_gradient(grid, v)
    # second differences move face derivatives from the edge midpoint to the crossing
    d2r = np.zeros_like(v)
    d2r[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
    d2r[-1] = d2r[-2]
    d2p = np.zeros_like(v)
    d2p[1:] = (np.roll(v[1:], -1, axis=1) - 2 * v[1:] + np.roll(v[1:], 1, axis=1)) / ht ** 2
    i = np.arange(1, nr)[:, None]
    j = np.arange(grid.ntheta)[None, :]
    jp = (j + 1) % grid.ntheta
    ci = [(i, j), (i, jp), (i + 1, jp), (i + 1, j)]
    cv = np.stack([v[a, b] for a, b in ci])  # (4, nr-1, nt)
    above = cv > s
    code = (above[0] * 1 + above[1] * 2 + above[2] * 4 + above[3] * 8)

    rho_n = lambda a: a * h  # noqa: E731
    # crossing point, J and gradient magnitude on each edge
    pts, grads = [], []
    for e, (p, q) in enumerate(_EDGE_CORNERS):
        (ia, ja), (ib, jb) = ci[p], ci[q]
        va, vb = cv[p], cv[q]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (s - va) / (vb - va)
        t = np.clip(np.nan_to_num(t), 0.0, 1.0)
        ja_f = np.broadcast_to(ja, t.shape)
        if e in (0, 2):  # angular edge on ring ia
            rho = np.broadcast_to(rho_n(ia) * 1.0, t.shape)
            sign = 1.0 if e == 0 else -1.0
            psi = ja_f * ht + sign * t * ht
            J = (1 - t) * grid.jac[ia, ja] + t * grid.jac[ib, jb]
            curv = 0.5 * (d2p[ia, ja] + d2p[ib, jb])
            gp = (sign * (vb - va) / ht + (t - 0.5) * ht * sign * curv) / J
            gr = (1 - t) * g_rho[ia, ja] + t * g_rho[ib, jb]
        else:  # radial edge along direction ja
            sign = 1.0 if e == 1 else -1.0
            rho = rho_n(ia) + sign * t * h
            psi = ja_f * ht * 1.0
            J = (1 - t) * grid.jac[ia, ja] + t * grid.jac[ib, jb]
            curv = 0.5 * (d2r[ia, ja] + d2r[ib, jb])
            gr = sign * (vb - va) / h + (t - 0.5) * h * sign * curv
            gp = (1 - t) * g_psi[ia, ja] + t * g_psi[ib, jb]
        pts.append((rho, psi, J))
        grads.append(np.hypot(gr, gp))

    centre = cv.mean(axis=0) > s
    pairs = []
    for c in range(1, 15):
        bits = [(c >> k) & 1 for k in range(4)]
        crossing = [e for e, (p, q) in enumerate(_EDGE_CORNERS) if bits[p] != bits[q]]
        sel = code == c
        if not sel.any():
            continue
        if len(crossing) == 2:
            pairs.append((sel, crossing[0], crossing[1]))
        else:  # saddle: c is 5 (a, c above) or 10 (b, d above)
            for mask, cen in ((sel & centre, True), (sel & ~centre, False)):
                if (c == 5) == cen:  # cut off corners b and d
                    pairs += [(mask, 0, 1), (mask, 2, 3)]
                else:  # cut off corners a and c
                    pairs += [(mask, 3, 0), (mask, 1, 2)]

    seg = {k: [] for k in ("rho0", "psi0", "rho1", "psi1", "length", "grad0", "grad1")}
    for mask, e0, e1 in pairs:
        r0, p0, J0 = (a[mask] for a in pts[e0])
        r1, p1, J1 = (a[mask] for a in pts[e1])
        dpsi = np.angle(np.exp(1j * (p1 - p0)))
        length = np.hypot(r1 - r0, 0.5 * (J0 + J1) * dpsi)
        seg["rho0"].append(r0)
        seg["psi0"].append(p0)
        seg["rho1"].append(r1)
        seg["psi1"].append(p1)
        seg["length"].append(length)
        seg["grad0"].append(grads[e0][mask])
        seg["grad1"].append(grads[e1][mask])
    return {k: (np.concatenate(x) if x else np.zeros(0)) for k, x in seg.items()}


def level_flux(grid, values, s):
    """``int_{G = s} |grad G|`` along the marching-squares contour."""
    seg = contour_segments(grid, values, s)
    if seg["length"].size == 0:
        raise DomainError(f"level {s} has no contour on the grid")
    return float(np.sum(seg["length"] * 0.5 * (seg["grad0"] + seg["grad1"])))


def _uniform_sum_cdf(x, a, b):
    """CDF of U1 + U2 with U1 ~ U[-a, a], U2 ~ U[-b, b]."""
    a, b = np.maximum(a, b), np.minimum(a, b)
    out = np.empty(np.broadcast(x, a, b).shape)
    x, a, b = np.broadcast_arrays(x, a, b)
    degenerate = a <= 0
    flat = (~degenerate) & (b <= 1e-12 * a)
    trap = (~degenerate) & (~flat)
    out[degenerate] = (x[degenerate] >= 0).astype(float)
    xf, af = x[flat], a[flat]
    out[flat] = np.clip((xf + af) / (2 * af), 0.0, 1.0)
    xt, at, bt = x[trap], a[trap], b[trap]
    f = np.empty_like(xt)
    lo1, lo2, hi2, hi1 = -(at + bt), -(at - bt), at - bt, at + bt
    f[:] = 1.0
    m = xt <= lo1
    f[m] = 0.0
    m = (xt > lo1) & (xt <= lo2)
    f[m] = (xt[m] - lo1[m]) ** 2 / (8 * at[m] * bt[m])
    m = (xt > lo2) & (xt <= hi2)
    f[m] = (xt[m] + at[m]) / (2 * at[m])
    m = (xt > hi2) & (xt < hi1)
    f[m] = 1.0 - (hi1[m] - xt[m]) ** 2 / (8 * at[m] * bt[m])
    out[trap] = f
    return out


def band_fraction(grid, values, lo, hi):
    """Fraction of each node's cell where ``lo < G < hi`` (2-D layout).

    G is modelled as linear across the cell with the node gradient, so a cell
    straddling a threshold contributes only the part inside the band.
    """
    v = np.asarray(values, dtype=float)
    g_rho, g_psi = node_gradient(grid, v)
    a = 0.5 * np.abs(g_rho) * grid.h_r
    b = 0.5 * np.abs(g_psi) * grid.jac * grid.h_theta
    a[0] = b[0] = 0.0
    F_hi = _uniform_sum_cdf(hi - v, a, b) if np.isfinite(hi) else 1.0
    F_lo = _uniform_sum_cdf(lo - v, a, b)
    return np.clip(F_hi - F_lo, 0.0, 1.0)
