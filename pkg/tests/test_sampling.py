import numpy as np
import pytest

from partmesh.data import face_template
from partmesh.errors import ContractViolation
from partmesh.mesh import grid_mesh, icosphere
from partmesh.sampling import barycentric_up, build_hierarchy, decimate


def test_target_equal_to_size_is_identity():
    m = grid_mesh(4, 4)
    coarse, down, kept = decimate(m, m.n_vertices)
    assert coarse is m
    np.testing.assert_array_equal(down.to_dense(), np.eye(16))
    np.testing.assert_array_equal(kept, np.arange(16))


def test_icosphere_decimation_keeps_original_positions():
    m = icosphere(3)
    assert m.n_vertices == 642
    coarse, down, kept = decimate(m, 160)
    assert abs(coarse.n_vertices - 160) <= 2
    originals = {tuple(v) for v in m.vertices.tolist()}
    assert all(tuple(v) in originals for v in coarse.vertices.tolist())
    np.testing.assert_array_equal(down.matmul(m.vertices), coarse.vertices)
    np.testing.assert_array_equal((down @ down.T.to_dense()), np.eye(coarse.n_vertices))


def test_decimation_is_deterministic():
    m = icosphere(2)
    a = decimate(m, 40)
    b = decimate(m, 40)
    np.testing.assert_array_equal(a[0].faces, b[0].faces)
    np.testing.assert_array_equal(a[2], b[2])


def test_decimated_mesh_stays_manifold():
    coarse, _, _ = decimate(icosphere(2), 42)
    faces = {tuple(sorted(f)) for f in coarse.faces.tolist()}
    assert len(faces) == len(coarse.faces)
    edges, counts = np.unique(np.sort(coarse.edges(), axis=1), axis=0, return_counts=True)
    # closed surface: Euler characteristic of a sphere
    assert coarse.n_vertices - len(edges) + len(coarse.faces) == 2


def test_target_bounds_rejected():
    with pytest.raises(ContractViolation):
        decimate(grid_mesh(3, 3), 2)
    with pytest.raises(ContractViolation):
        decimate(grid_mesh(3, 3), 10)


def test_planted_barycentric_coordinates():
    from partmesh.mesh import Mesh
    tri = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    w = np.array([0.2, 0.3, 0.5])
    p = w @ tri + [0, 0, 0.7]  # off-plane: projection is the planted point
    fine = Mesh(np.vstack([tri, p]), [[0, 1, 3], [1, 2, 3], [2, 0, 3]])
    coarse = Mesh(tri, [[0, 1, 2]])
    up = barycentric_up(coarse, fine, [0, 1, 2]).to_dense()
    np.testing.assert_allclose(up[3], w, atol=1e-12)
    np.testing.assert_array_equal(up[:3], np.eye(3))


def test_outside_point_is_clamped_to_triangle():
    from partmesh.mesh import Mesh
    tri = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    fine = Mesh(np.vstack([tri, [[2.0, -1.0, 0.0]]]), [[0, 1, 3], [1, 2, 0]])
    up = barycentric_up(Mesh(tri, [[0, 1, 2]]), fine, [0, 1, 2]).to_dense()
    np.testing.assert_allclose(up[3], [0, 1, 0], atol=1e-12)


def test_coarse_without_faces_rejected():
    from partmesh.mesh import Mesh
    with pytest.raises(ContractViolation):
        barycentric_up(Mesh(np.eye(3), np.zeros((0, 3), int)), grid_mesh(2, 2), [0, 1, 2])


@pytest.fixture(scope="module")
def desk_hierarchy():
    return build_hierarchy(face_template(), levels=4, factor=4.0)


def test_desk_hierarchy_sizes(desk_hierarchy):
    for got, want in zip(desk_hierarchy.sizes, [1280, 320, 80, 20, 5]):
        assert abs(got - want) <= 2


def test_up_matrices_contract(desk_hierarchy):
    h = desk_hierarchy
    for ell, up in enumerate(h.up):
        U = up.to_dense()
        fine, coarse, kept = h.meshes[ell], h.meshes[ell + 1], h.kept[ell]
        assert U.min() >= 0
        np.testing.assert_allclose(U.sum(axis=1), 1.0, atol=1e-9)
        assert np.count_nonzero(U, axis=1).max() <= 3
        np.testing.assert_array_equal(up.matmul(coarse.vertices)[kept], fine.vertices[kept])
        np.testing.assert_array_equal(h.down[ell].matmul(U), np.eye(coarse.n_vertices))
        const = up.matmul(np.full(coarse.n_vertices, 2.5))
        np.testing.assert_allclose(const, 2.5, rtol=1e-12)


def test_each_level_laplacian_is_valid(desk_hierarchy):
    for mesh, lap in zip(desk_hierarchy.meshes, desk_hierarchy.laplacians):
        assert lap.laplacian.shape == (mesh.n_vertices,) * 2
        assert np.abs(lap.laplacian.row_sums()).max() <= 1e-9
        assert lap.lambda_max > 0


def test_level_bounds():
    with pytest.raises(ContractViolation):
        build_hierarchy(grid_mesh(4, 4), levels=0)
    h = build_hierarchy(grid_mesh(4, 4), levels=1)
    assert h.sizes == [16, 4]
    with pytest.raises(ContractViolation, match="level 2"):
        build_hierarchy(grid_mesh(3, 3), levels=3)
