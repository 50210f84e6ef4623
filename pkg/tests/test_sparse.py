import numpy as np
import pytest

from partmesh import kernels
from partmesh.errors import ContractViolation
from partmesh.sparse import SparseMatrix


def test_triplets_sum_duplicates_and_drop_zeros():
    s = SparseMatrix.from_triplets((2, 3), [0, 0, 1, 1], [2, 2, 0, 1], [1.0, 2.0, 5.0, 0.0])
    np.testing.assert_array_equal(s.to_dense(), [[0, 0, 3], [5, 0, 0]])
    assert s.nnz == 2


def test_canonical_order_and_bounds():
    s = SparseMatrix.from_triplets((3, 3), [2, 0, 1], [0, 2, 1], [1.0, 2.0, 3.0])
    assert list(s.indptr) == [0, 1, 2, 3]
    assert list(s.indices) == [2, 1, 0]
    with pytest.raises(ContractViolation):
        SparseMatrix.from_triplets((2, 2), [0], [2], [1.0])
    with pytest.raises(ContractViolation):
        SparseMatrix((1, 1), [0, 1], [0], [np.inf])


def test_matmul_and_transpose_against_dense(rng):
    a = np.where(rng.random((13, 9)) < 0.3, rng.normal(size=(13, 9)), 0.0)
    s = SparseMatrix.from_dense(a)
    x = rng.normal(size=(9, 4, 2))
    np.testing.assert_allclose(s.matmul(x), np.einsum("ij,jkl->ikl", a, x), atol=1e-13)
    np.testing.assert_array_equal(s.T.to_dense(), a.T)
    with pytest.raises(ContractViolation):
        s.matmul(np.ones((8, 2)))


def test_empty_rows_and_empty_matrix():
    s = SparseMatrix.from_triplets((4, 2), [1], [1], [2.0])
    np.testing.assert_array_equal(s.matmul(np.ones((2, 3)))[:, 0], [0, 2, 0, 0])
    np.testing.assert_array_equal(s.row_sums(), [0, 2, 0, 0])
    z = SparseMatrix.from_triplets((3, 3), [], [], [])
    np.testing.assert_array_equal(z.matmul(np.ones((3, 1))), np.zeros((3, 1)))


@pytest.mark.parametrize("impl", sorted(kernels.IMPLEMENTATIONS))
def test_kernel_backends_agree(impl, rng):
    a = np.where(rng.random((40, 30)) < 0.1, rng.normal(size=(40, 30)), 0.0)
    a[5] = 0.0
    s = SparseMatrix.from_dense(a)
    x = rng.normal(size=(30, 7))
    out = kernels.csr_matmul(s.indptr, s.indices, s.data, 40, x, impl=impl)
    np.testing.assert_allclose(out, a @ x, atol=1e-13)
