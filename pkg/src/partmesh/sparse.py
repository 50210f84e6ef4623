"""Row-compressed sparse matrix used for adjacency, Laplacians and sampling."""
import numpy as np

from . import kernels
from .errors import ContractViolation


class SparseMatrix:
    """Immutable CSR matrix with sorted column indices and no explicit zeros.

    Build with :meth:`from_triplets` (duplicates are summed, zeros dropped) or
    :meth:`from_dense`. ``matmul`` accepts any array whose first axis has
    ``cols`` entries; trailing axes are carried through.
    """

    __slots__ = ("shape", "indptr", "indices", "data", "_transpose")

    def __init__(self, shape, indptr, indices, data):
        rows, cols = int(shape[0]), int(shape[1])
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        data = np.ascontiguousarray(data, dtype=np.float64)
        if indptr.shape != (rows + 1,) or indptr[0] != 0 or indptr[-1] != data.size:
            raise ContractViolation("malformed row pointer")
        if indices.size != data.size:
            raise ContractViolation("indices and data lengths differ")
        if indices.size and (indices.min() < 0 or indices.max() >= cols):
            raise ContractViolation("column index out of bounds")
        if not np.all(np.isfinite(data)) or np.any(data == 0.0):
            raise ContractViolation("stored values must be finite and nonzero")
        for a in (indptr, indices, data):
            a.setflags(write=False)
        self.shape = (rows, cols)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._transpose = None

    @classmethod
    def from_triplets(cls, shape, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        nr, nc = int(shape[0]), int(shape[1])
        if rows.size and (rows.min() < 0 or rows.max() >= nr or cols.min() < 0 or cols.max() >= nc):
            raise ContractViolation("triplet index out of bounds")
        key = rows * nc + cols
        order = np.argsort(key, kind="stable")
        key, values = key[order], values[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(values, start) if values.size else values
        keep = summed != 0.0
        uniq, summed = uniq[keep], summed[keep]
        r, c = np.divmod(uniq, nc) if nc else (uniq, uniq)
        indptr = np.zeros(nr + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=nr), out=indptr[1:])
        return cls((nr, nc), indptr, c, summed)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls.from_triplets(a.shape, r, c, a[r, c])

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls.from_triplets((n, n), idx, idx, np.ones(n))

    @property
    def nnz(self):
        return self.data.size

    def row_indices(self):
        return np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))

    def triplets(self):
        return self.row_indices(), self.indices.copy(), self.data.copy()

    def to_dense(self):
        out = np.zeros(self.shape)
        out[self.row_indices(), self.indices] = self.data
        return out

    @property
    def T(self):
        if self._transpose is None:
            r, c, v = self.triplets()
            self._transpose = SparseMatrix.from_triplets(self.shape[::-1], c, r, v)
        return self._transpose

    def matmul(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0 or x.shape[0] != self.shape[1]:
            raise ContractViolation(f"cannot multiply {self.shape} sparse by {x.shape}")
        flat = x.reshape(x.shape[0], -1)
        out = kernels.csr_matmul(self.indptr, self.indices, self.data, self.shape[0], flat)
        return out.reshape((self.shape[0],) + x.shape[1:])

    __matmul__ = matmul

    def scaled(self, alpha):
        return SparseMatrix(self.shape, self.indptr, self.indices, self.data * float(alpha))

    def add(self, other):
        if self.shape != other.shape:
            raise ContractViolation("shape mismatch in sparse add")
        r1, c1, v1 = self.triplets()
        r2, c2, v2 = other.triplets()
        return SparseMatrix.from_triplets(
            self.shape, np.concatenate([r1, r2]), np.concatenate([c1, c2]), np.concatenate([v1, v2])
        )

    def row_sums(self):
        return np.bincount(self.row_indices(), weights=self.data, minlength=self.shape[0])

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"
