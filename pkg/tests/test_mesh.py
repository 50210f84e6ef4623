import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partmesh.errors import ContractViolation, ParseError
from partmesh.mesh import (Mesh, adjacency_matrix, grid_mesh, icosphere, laplacian_bundle,
                           laplacian_from_adjacency, load_obj, read_ply_header,
                           vertex_distance_field, write_obj, write_ply_colored)
from partmesh.sparse import SparseMatrix


def random_mesh(rng, rows=None, cols=None):
    rows = rows or int(rng.integers(2, 7))
    cols = cols or int(rng.integers(2, 7))
    g = grid_mesh(rows, cols)
    return g.with_vertices(g.vertices + rng.normal(scale=0.3, size=g.vertices.shape))


def test_minimal_triangle():
    m = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3")
    assert m.n_vertices == 3
    assert m.faces.tolist() == [[0, 1, 2]]


def test_quad_is_fan_triangulated_and_suffixes_ignored():
    text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2/5/1 3 4\n"
    assert load_obj(text).faces.tolist() == [[0, 1, 2], [0, 2, 3]]


@pytest.mark.parametrize("text, line", [
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9", 4),
    ("v 0 0 0\nv 1 x 0\nv 0 1 0\nf 1 2 3", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        load_obj(text)
    assert info.value.line == line


def test_too_few_vertices():
    with pytest.raises(ParseError):
        load_obj("v 0 0 0\nv 1 0 0\n")


def test_mesh_invariants():
    with pytest.raises(ContractViolation):
        Mesh(np.zeros((3, 3)), [[0, 0, 1]])
    with pytest.raises(ContractViolation):
        Mesh(np.zeros((3, 3)), [[0, 1, 3]])


@pytest.mark.parametrize("seed", range(10))
def test_obj_round_trip_is_lossless(seed):
    rng = np.random.default_rng(seed)
    m = random_mesh(rng)
    m = m.with_vertices(m.vertices * 10.0 ** rng.integers(-8, 8))
    back = load_obj(write_obj(m))
    assert np.abs(back.vertices - m.vertices).max() <= 1e-12 * max(1.0, np.abs(m.vertices).max())
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.faces, m.faces)


def test_ply_colors_and_header():
    m = grid_mesh(2, 2)
    const = write_ply_colored(m, np.full(4, 3.0)).decode()
    body = const.split("end_header\n")[1].splitlines()[:4]
    assert all(line.endswith(" 0 0 255") for line in body)
    ramp = write_ply_colored(m, [0.0, 0.25, 0.5, 1.0]).decode()
    body = ramp.split("end_header\n")[1].splitlines()[:4]
    assert body[0].endswith(" 0 0 255") and body[3].endswith(" 255 0 0")
    counts, props = read_ply_header(ramp.encode())
    assert counts == {"vertex": 4, "face": len(m.faces)}
    assert props == ["x", "y", "z", "red", "green", "blue"]
    with pytest.raises(ContractViolation):
        write_ply_colored(m, [1.0, 2.0])


def test_single_edge_laplacian():
    a = SparseMatrix.from_dense([[0, 1], [1, 0]])
    b = laplacian_from_adjacency(a)
    np.testing.assert_array_equal(b.laplacian.to_dense(), [[1, -1], [-1, 1]])
    assert b.lambda_max == pytest.approx(2.0, rel=1e-12)
    np.testing.assert_allclose(b.scaled.to_dense(), [[0, -1], [-1, 0]], atol=1e-12)


def test_triangle_laplacian_against_dense_eigensolve():
    m = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3")
    b = laplacian_bundle(m)
    L = b.laplacian.to_dense()
    np.testing.assert_array_equal(np.diag(L), [2, 2, 2])
    assert np.all(L[~np.eye(3, dtype=bool)] == -1)
    assert b.lambda_max == pytest.approx(np.linalg.eigvalsh(L).max(), rel=1e-9)
    assert b.lambda_max == pytest.approx(3.0, rel=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_laplacian_invariants(seed):
    rng = np.random.default_rng(seed)
    m = random_mesh(rng)
    b = laplacian_bundle(m)
    A = b.adjacency.to_dense()
    assert np.array_equal(A, A.T) and not np.any(np.diag(A))
    assert set(np.unique(A)) <= {0.0, 1.0}
    assert np.abs(b.laplacian.row_sums()).max() <= 1e-9
    assert b.lambda_max > 0
    if m.n_vertices <= 50:
        ev = np.linalg.eigvalsh(b.scaled.to_dense())
        assert ev.min() >= -1 - 1e-6 and ev.max() <= 1 + 1e-6


def test_disconnected_mesh_warns_but_proceeds():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]], float)
    m = Mesh(v, [[0, 1, 2], [3, 4, 5]])
    with pytest.warns(RuntimeWarning, match="disconnected"):
        b = laplacian_bundle(m)
    assert b.lambda_max == pytest.approx(3.0, rel=1e-9)


def test_power_iteration_fallback_uses_degree_bound():
    m = icosphere(1)
    with pytest.warns(RuntimeWarning, match="did not converge"):
        b = laplacian_bundle(m, max_iter=2)
    assert b.lambda_max == 2 * adjacency_matrix(m).row_sums().max()
    assert "did not converge" in b.note


def test_distance_field_examples(rng):
    m = random_mesh(rng, 4, 5)
    d = vertex_distance_field(m, m)
    assert d.hausdorff == 0 and not d.per_vertex.any()
    shifted = m.with_vertices(m.vertices + [0, 0, 1])
    np.testing.assert_allclose(vertex_distance_field(m, shifted).per_vertex, 1.0, rtol=1e-15)
    with pytest.raises(ContractViolation):
        vertex_distance_field(m, grid_mesh(3, 3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_distance_field_brute_force_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    a = random_mesh(rng, 3, 4)
    b = a.with_vertices(rng.normal(size=a.vertices.shape))
    d = vertex_distance_field(a, b)
    brute = max(
        sum((a.vertices[i, k] - b.vertices[i, k]) ** 2 for k in range(3)) ** 0.5
        for i in range(a.n_vertices)
    )
    assert d.hausdorff == pytest.approx(brute, rel=1e-14)
    assert np.array_equal(d.per_vertex, vertex_distance_field(b, a).per_vertex)
    assert d.hausdorff == d.per_vertex.max() and d.per_vertex.min() >= 0
