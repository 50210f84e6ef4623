"""Hot-kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy versions
are. Set ``PARTMESH_BACKEND=python`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("PARTMESH_BACKEND", "").lower() == "python":
        raise ImportError("compiled kernels disabled by PARTMESH_BACKEND")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

IMPLEMENTATIONS = {"python": _pykernels}
if BACKEND == "cython":
    IMPLEMENTATIONS["cython"] = _impl


def csr_matmul(indptr, indices, data, nrows, x, impl=None):
    mod = _impl if impl is None else IMPLEMENTATIONS[impl]
    x = np.ascontiguousarray(x, dtype=np.float64)
    return mod.csr_matmul(indptr, indices, data, nrows, x)


def closest_triangles(points, vertices, faces, impl=None):
    mod = _impl if impl is None else IMPLEMENTATIONS[impl]
    return mod.closest_triangles(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(vertices, dtype=np.float64),
        np.ascontiguousarray(faces, dtype=np.int64),
    )
