"""Triangle meshes, OBJ/PLY I/O, graph Laplacians and distance fields."""
import io
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParseError
from .sparse import SparseMatrix

log = logging.getLogger(__name__)

POWER_TOL = 1e-9
POWER_MAX_ITER = 10000
POWER_SEED = 0


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class Mesh:
    """Vertex positions (N, 3) and triangle indices (F, 3). Immutable."""

    __slots__ = ("vertices", "faces")

    def __init__(self, vertices, faces):
        v = _frozen(vertices, np.float64)
        f = _frozen(faces, np.int64).reshape(-1, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ContractViolation(f"vertices must be (N, 3), got {v.shape}")
        if v.shape[0] < 3:
            raise ContractViolation(f"a mesh needs at least 3 vertices, got {v.shape[0]}")
        if f.size:
            if f.min() < 0 or f.max() >= v.shape[0]:
                raise ContractViolation("face index out of range")
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise ContractViolation("degenerate face (repeated vertex index)")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def __setattr__(self, name, value):
        raise AttributeError("Mesh is immutable")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    def with_vertices(self, vertices):
        """Same connectivity, new positions."""
        return Mesh(vertices, self.faces)

    def edges(self):
        """Unique undirected edges as a sorted (E, 2) array with i < j."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def __repr__(self):
        return f"Mesh(n_vertices={self.n_vertices}, n_faces={len(self.faces)})"


# ---------------------------------------------------------------- OBJ / PLY


def _parse_index(token, n_vertices, lineno):
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise ParseError(f"bad face index {token!r}", lineno) from None
    if idx < 0:
        idx = n_vertices + idx
    else:
        idx -= 1
    if idx < 0 or idx >= n_vertices:
        raise ParseError(f"face index {head} out of range (have {n_vertices} vertices)", lineno)
    return idx


def load_obj(text):
    """Parse ASCII OBJ text. Polygons are fan-triangulated from their first corner."""
    verts = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *fields = line.split()
        if tag == "v":
            if len(fields) < 3:
                raise ParseError("vertex needs three coordinates", lineno)
            try:
                verts.append([float(t) for t in fields[:3]])
            except ValueError:
                raise ParseError(f"malformed number in {raw.strip()!r}", lineno) from None
        elif tag == "f":
            if len(fields) < 3:
                raise ParseError("face needs at least three indices", lineno)
            idx = [_parse_index(t, len(verts), lineno) for t in fields]
            for k in range(1, len(idx) - 1):
                tri = (idx[0], idx[k], idx[k + 1])
                if len(set(tri)) < 3:
                    raise ParseError(f"degenerate face {tri}", lineno)
                faces.append(tri)
    if len(verts) < 3:
        raise ParseError(f"need at least 3 vertices, found {len(verts)}")
    return Mesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


def read_obj(path):
    with open(path, encoding="utf-8") as fh:
        return load_obj(fh.read())


def write_obj(mesh):
    buf = io.StringIO()
    for x, y, z in mesh.vertices.tolist():
        buf.write(f"v {x!r} {y!r} {z!r}\n")
    for a, b, c in (mesh.faces + 1).tolist():
        buf.write(f"f {a} {b} {c}\n")
    return buf.getvalue()


def save_obj(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_obj(mesh))


def scalar_colors(values):
    """Linear blue (min) to red (max) ramp as uint8 RGB; a constant field is all blue."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    t = np.zeros_like(values) if hi <= lo else (values - lo) / (hi - lo)
    rgb = np.zeros((values.size, 3), dtype=np.uint8)
    rgb[:, 0] = np.rint(255.0 * t)
    rgb[:, 2] = np.rint(255.0 * (1.0 - t))
    return rgb


def write_ply_colored(mesh, per_vertex_scalar):
    """ASCII PLY bytes with x, y, z and a red/blue color per vertex."""
    s = np.asarray(per_vertex_scalar, dtype=np.float64).ravel()
    if s.size != mesh.n_vertices:
        raise ContractViolation(f"scalar field has {s.size} values for {mesh.n_vertices} vertices")
    rgb = scalar_colors(s)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for (x, y, z), (r, g, b) in zip(mesh.vertices.tolist(), rgb.tolist()):
        lines.append(f"{x!r} {y!r} {z!r} {r} {g} {b}")
    for a, b, c in mesh.faces.tolist():
        lines.append(f"3 {a} {b} {c}")
    return ("\n".join(lines) + "\n").encode("ascii")


def read_ply_header(data):
    """Element counts and vertex property names from an ASCII PLY header."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    counts, props, current = {}, [], None
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "element":
            current = parts[1]
            counts[current] = int(parts[2])
        elif parts[0] == "property" and current == "vertex":
            props.append(parts[-1])
        elif parts[0] == "end_header":
            break
    return counts, props


# ---------------------------------------------------------------- Laplacian


@dataclass(frozen=True)
class LaplacianBundle:
    adjacency: SparseMatrix
    laplacian: SparseMatrix
    lambda_max: float
    scaled: SparseMatrix
    note: str = ""


def adjacency_matrix(mesh):
    e = mesh.edges()
    n = mesh.n_vertices
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return SparseMatrix.from_triplets((n, n), rows, cols, np.ones(rows.size))


def _n_components(adjacency):
    n = adjacency.shape[0]
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for r, c in zip(*adjacency.triplets()[:2]):
        a, b = find(r), find(c)
        if a != b:
            parent[max(a, b)] = min(a, b)
    return len({find(i) for i in range(n)})


def power_iteration(matrix, tol=POWER_TOL, max_iter=POWER_MAX_ITER, seed=POWER_SEED):
    """Largest eigenvalue of a symmetric PSD sparse matrix.

    Returns ``(value, converged, iterations)``. Convergence means the Rayleigh
    quotient changed by at most ``tol`` relative between iterations.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(matrix.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = matrix.matmul(v)
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, True, it
        v = w / norm
        if it > 1 and abs(new - lam) <= tol * abs(new):
            return new, True, it
        lam = new
    return lam, False, max_iter


def laplacian_from_adjacency(adjacency, tol=POWER_TOL, max_iter=POWER_MAX_ITER, seed=POWER_SEED):
    n = adjacency.shape[0]
    degree = adjacency.row_sums()
    idx = np.arange(n)
    r, c, v = adjacency.triplets()
    lap = SparseMatrix.from_triplets(
        (n, n), np.concatenate([idx, r]), np.concatenate([idx, c]), np.concatenate([degree, -v])
    )
    notes = []
    if n > 1 and _n_components(adjacency) > 1:
        msg = "mesh graph is disconnected"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
    lam, converged, iters = power_iteration(lap, tol, max_iter, seed)
    if not converged or lam <= 0.0:
        bound = 2.0 * float(degree.max()) if degree.size else 0.0
        msg = f"power iteration did not converge after {iters} iterations; using bound {bound}"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
        lam = bound
    if lam <= 0.0:
        raise ContractViolation("graph has no edges; Laplacian spectrum is degenerate")
    log.debug("lambda_max=%.12g after %d iterations", lam, iters)
    scaled = lap.scaled(2.0 / lam).add(SparseMatrix.identity(n).scaled(-1.0))
    return LaplacianBundle(adjacency, lap, lam, scaled, "; ".join(notes))


def laplacian_bundle(mesh, **kwargs):
    return laplacian_from_adjacency(adjacency_matrix(mesh), **kwargs)


# ---------------------------------------------------------------- distances


@dataclass(frozen=True)
class DistanceField:
    per_vertex: np.ndarray
    hausdorff: float


def vertex_distance_field(a, b):
    """Per-vertex Euclidean distance between two meshes in correspondence."""
    va = a.vertices if isinstance(a, Mesh) else np.asarray(a, dtype=np.float64)
    vb = b.vertices if isinstance(b, Mesh) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ContractViolation(f"vertex counts differ: {va.shape[0]} vs {vb.shape[0]}")
    d = np.sqrt(((va - vb) ** 2).sum(axis=1))
    return DistanceField(d, float(d.max()) if d.size else 0.0)


# ---------------------------------------------------------------- generators


def icosphere(subdivisions=0, radius=1.0):
    """Subdivided icosahedron: 12, 42, 162, 642, ... vertices."""
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return Mesh(np.array(verts) * radius, np.array(faces, dtype=np.int64))


def grid_mesh(rows, cols, width=1.0, height=1.0):
    """Flat rows x cols vertex grid in the z=0 plane, two triangles per cell."""
    ys, xs = np.meshgrid(np.linspace(-height / 2, height / 2, rows),
                         np.linspace(-width / 2, width / 2, cols), indexing="ij")
    verts = np.stack([xs.ravel(), ys.ravel(), np.zeros(rows * cols)], axis=1)
    faces = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            a = r * cols + c
            b, d, e = a + 1, a + cols, a + cols + 1
            # alternate the diagonal so the grid has no preferred direction
            if (r + c) % 2 == 0:
                faces += [(a, b, e), (a, e, d)]
            else:
                faces += [(a, b, d), (b, e, d)]
    return Mesh(verts, np.array(faces, dtype=np.int64))
