# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def csr_matmul(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, Py_ssize_t nrows, const double[:, ::1] x):
    cdef Py_ssize_t ncols = x.shape[1]
    out_arr = np.zeros((nrows, ncols))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, p, j, col
    cdef double val
    with nogil:
        for r in range(nrows):
            for p in range(indptr[r], indptr[r + 1]):
                col = indices[p]
                val = data[p]
                for j in range(ncols):
                    out[r, j] += val * x[col, j]
    return out_arr


cdef inline double _dot(double x0, double x1, double x2,
                        double y0, double y1, double y2) noexcept nogil:
    return x0 * y0 + x1 * y1 + x2 * y2


cdef void _closest(const double* p, const double* a, const double* b,
                   const double* c, double* out) noexcept nogil:
    # Barycentrics of the closest point on triangle abc to p, written to out[0:3].
    cdef double ab0 = b[0] - a[0], ab1 = b[1] - a[1], ab2 = b[2] - a[2]
    cdef double ac0 = c[0] - a[0], ac1 = c[1] - a[1], ac2 = c[2] - a[2]
    cdef double d1 = _dot(p[0] - a[0], p[1] - a[1], p[2] - a[2], ab0, ab1, ab2)
    cdef double d2 = _dot(p[0] - a[0], p[1] - a[1], p[2] - a[2], ac0, ac1, ac2)
    cdef double d3, d4, d5, d6, va, vb, vc, t, denom
    if d1 <= 0 and d2 <= 0:
        out[0] = 1.0; out[1] = 0.0; out[2] = 0.0
        return
    d3 = _dot(p[0] - b[0], p[1] - b[1], p[2] - b[2], ab0, ab1, ab2)
    d4 = _dot(p[0] - b[0], p[1] - b[1], p[2] - b[2], ac0, ac1, ac2)
    if d3 >= 0 and d4 <= d3:
        out[0] = 0.0; out[1] = 1.0; out[2] = 0.0
        return
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3) if d1 - d3 != 0.0 else 0.0
        out[0] = 1.0 - t; out[1] = t; out[2] = 0.0
        return
    d5 = _dot(p[0] - c[0], p[1] - c[1], p[2] - c[2], ab0, ab1, ab2)
    d6 = _dot(p[0] - c[0], p[1] - c[1], p[2] - c[2], ac0, ac1, ac2)
    if d6 >= 0 and d5 <= d6:
        out[0] = 0.0; out[1] = 0.0; out[2] = 1.0
        return
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6) if d2 - d6 != 0.0 else 0.0
        out[0] = 1.0 - t; out[1] = 0.0; out[2] = t
        return
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        denom = (d4 - d3) + (d5 - d6)
        t = (d4 - d3) / denom if denom != 0.0 else 0.0
        out[0] = 0.0; out[1] = 1.0 - t; out[2] = t
        return
    denom = va + vb + vc
    if denom != 0.0:
        out[1] = vb / denom
        out[2] = vc / denom
    else:
        out[1] = 0.0
        out[2] = 0.0
    out[0] = 1.0 - out[1] - out[2]


cdef double _sqdist(const double* p, const double* a, const double* b,
                    const double* c, double* bary) noexcept nogil:
    _closest(p, a, b, c, bary)
    cdef double dist = 0.0, q, diff
    cdef int k
    for k in range(3):
        q = bary[0] * a[k] + bary[1] * b[k] + bary[2] * c[k]
        diff = p[k] - q
        dist = dist + diff * diff
    return dist


def closest_triangles(const double[:, ::1] points, const double[:, ::1] vertices,
                      const cnp.int64_t[:, ::1] faces):
    cdef Py_ssize_t n = points.shape[0], nf = faces.shape[0]
    tri_arr = np.empty(n, dtype=np.int64)
    bary_arr = np.empty((n, 3))
    cdef cnp.int64_t[::1] tri = tri_arr
    cdef double[:, ::1] bary = bary_arr
    cdef Py_ssize_t i, f
    cdef double lim, dist
    cdef double cur[3]
    with nogil:
        for i in range(n):
            lim = 0.0
            for f in range(nf):
                dist = _sqdist(&points[i, 0], &vertices[faces[f, 0], 0],
                               &vertices[faces[f, 1], 0], &vertices[faces[f, 2], 0], cur)
                if f == 0 or dist < lim:
                    lim = dist
            # near-equal distances count as ties; lowest face index wins
            lim = lim + 1e-12 * (1.0 + lim)
            for f in range(nf):
                dist = _sqdist(&points[i, 0], &vertices[faces[f, 0], 0],
                               &vertices[faces[f, 1], 0], &vertices[faces[f, 2], 0], cur)
                if dist <= lim:
                    tri[i] = f
                    bary[i, 0] = cur[0]; bary[i, 1] = cur[1]; bary[i, 2] = cur[2]
                    break
    return tri_arr, bary_arr
