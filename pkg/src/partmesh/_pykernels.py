"""Numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` must agree with them to
rounding. Both take contiguous float64/int64 arrays and return fresh arrays.
"""
import numpy as np

_CHUNK_ELEMS = 1 << 21
_TIE_RTOL = 1e-12


def csr_matmul(indptr, indices, data, nrows, x):
    """Return ``S @ x`` for a CSR matrix ``S`` and a 2-D dense ``x``."""
    out = np.zeros((nrows, x.shape[1]))
    if data.size == 0:
        return out
    prod = data[:, None] * x[indices]
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    out[nonempty] = np.add.reduceat(prod, starts[nonempty], axis=0)
    return out


def _closest_on_triangles(p, a, b, c):
    # p: (m, 1, 3); a, b, c: (f, 3). Returns barycentrics (m, f, 3).
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("mfi,fi->mf", ap, ab)
    d2 = np.einsum("mfi,fi->mf", ap, ac)
    bp = p - b
    d3 = np.einsum("mfi,fi->mf", bp, ab)
    d4 = np.einsum("mfi,fi->mf", bp, ac)
    cp = p - c
    d5 = np.einsum("mfi,fi->mf", cp, ab)
    d6 = np.einsum("mfi,fi->mf", cp, ac)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0.0, vb / denom, 0.0)
        w = np.where(denom != 0.0, vc / denom, 0.0)
        u = 1.0 - v - w

        # lower-priority regions first; later assignments override
        e_bc = (d4 - d3) + (d5 - d6)
        t_bc = np.where(e_bc != 0.0, (d4 - d3) / e_bc, 0.0)
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        u, v, w = np.where(m, 0.0, u), np.where(m, 1.0 - t_bc, v), np.where(m, t_bc, w)

        t_ac = np.where(d2 - d6 != 0.0, d2 / (d2 - d6), 0.0)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        u, v, w = np.where(m, 1.0 - t_ac, u), np.where(m, 0.0, v), np.where(m, t_ac, w)

        m = (d6 >= 0) & (d5 <= d6)
        u, v, w = np.where(m, 0.0, u), np.where(m, 0.0, v), np.where(m, 1.0, w)

        t_ab = np.where(d1 - d3 != 0.0, d1 / (d1 - d3), 0.0)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        u, v, w = np.where(m, 1.0 - t_ab, u), np.where(m, t_ab, v), np.where(m, 0.0, w)

        m = (d3 >= 0) & (d4 <= d3)
        u, v, w = np.where(m, 0.0, u), np.where(m, 1.0, v), np.where(m, 0.0, w)

        m = (d1 <= 0) & (d2 <= 0)
        u, v, w = np.where(m, 1.0, u), np.where(m, 0.0, v), np.where(m, 0.0, w)
    return u, v, w


def closest_triangles(points, vertices, faces):
    """Nearest triangle for every point, by point-to-triangle distance.

    Returns ``(tri, bary)``: the winning face index per point (lowest index on
    ties) and the barycentric coordinates of the closest point on it.
    """
    n = points.shape[0]
    nf = faces.shape[0]
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    tri = np.empty(n, dtype=np.int64)
    bary = np.empty((n, 3))
    step = max(1, _CHUNK_ELEMS // max(nf, 1))
    for s in range(0, n, step):
        p = points[s:s + step, None, :]
        u, v, w = _closest_on_triangles(p, a, b, c)
        q = u[..., None] * a + v[..., None] * b + w[..., None] * c
        d = p - q
        dist = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]
        # near-equal distances count as ties so both backends pick the lowest index
        lim = dist.min(axis=1, keepdims=True)
        best = np.argmax(dist <= lim + _TIE_RTOL * (1.0 + lim), axis=1)
        rows = np.arange(best.size)
        tri[s:s + step] = best
        bary[s:s + step, 0] = u[rows, best]
        bary[s:s + step, 1] = v[rows, best]
        bary[s:s + step, 2] = w[rows, best]
    return tri, bary
