"""Coarse-to-fine mesh hierarchy: quadric decimation plus sampling matrices.

Edges collapse onto one of their endpoints, never onto an optimized point, so
every coarse vertex is an original vertex and the down-sampling matrices are
0/1 row selectors.
"""
import heapq
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractViolation
from .mesh import LaplacianBundle, Mesh, laplacian_bundle
from .sparse import SparseMatrix

log = logging.getLogger(__name__)

_AREA_EPS = 1e-14


def _face_quadric(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n)
    if norm <= _AREA_EPS:
        return None
    n /= norm
    plane = np.append(n, -n @ p0)
    return np.outer(plane, plane)


class _Decimator:
    def __init__(self, mesh):
        self.pos = mesh.vertices
        self.hpos = np.hstack([self.pos, np.ones((len(self.pos), 1))])
        n = mesh.n_vertices
        self.alive = np.ones(n, dtype=bool)
        self.faces = {i: tuple(f) for i, f in enumerate(mesh.faces.tolist())}
        self.vfaces = [set() for _ in range(n)]
        self.quadric = np.zeros((n, 4, 4))
        for fi, (a, b, c) in self.faces.items():
            for v in (a, b, c):
                self.vfaces[v].add(fi)
            q = _face_quadric(self.pos[a], self.pos[b], self.pos[c])
            if q is not None:
                self.quadric[a] += q
                self.quadric[b] += q
                self.quadric[c] += q
        self.heap = []
        self.version = {}

    def neighbors(self, v):
        out = set()
        for fi in self.vfaces[v]:
            out.update(self.faces[fi])
        out.discard(v)
        return out

    def edge_faces(self, a, b):
        return self.vfaces[a] & self.vfaces[b]

    def is_boundary_vertex(self, v):
        return any(len(self.edge_faces(v, w)) == 1 for w in self.neighbors(v))

    def cost(self, a, b):
        q = self.quadric[a] + self.quadric[b]
        ha, hb = self.hpos[a], self.hpos[b]
        cost_keep_a = float(ha @ q @ ha)
        cost_keep_b = float(hb @ q @ hb)
        # ties keep the lower index (a < b)
        if cost_keep_a <= cost_keep_b:
            return max(cost_keep_a, 0.0), a
        return max(cost_keep_b, 0.0), b

    def push(self, a, b):
        if a > b:
            a, b = b, a
        c, keep = self.cost(a, b)
        stamp = self.version.get((a, b), 0) + 1
        self.version[(a, b)] = stamp
        heapq.heappush(self.heap, (c, a, b, keep, stamp))

    def legal(self, remove, keep):
        shared = self.edge_faces(remove, keep)
        if not shared:
            return False
        opposite = set()
        for fi in shared:
            opposite.update(self.faces[fi])
        opposite -= {remove, keep}
        # link condition
        if self.neighbors(remove) & self.neighbors(keep) != opposite:
            return False
        if len(shared) > 1 and self.is_boundary_vertex(remove) and self.is_boundary_vertex(keep):
            return False
        if self.alive.sum() <= 4 and len(shared) > 1:
            return False
        keep_faces = {tuple(sorted(self.faces[fi])) for fi in self.vfaces[keep]}
        p_new = self.pos[keep]
        for fi in self.vfaces[remove] - shared:
            tri = self.faces[fi]
            pts = [self.pos[v] for v in tri]
            before = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            pts[tri.index(remove)] = p_new
            after = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            if np.linalg.norm(after) <= _AREA_EPS or before @ after <= 0.0:
                return False
            moved = tuple(sorted(keep if v == remove else v for v in tri))
            if moved in keep_faces:
                return False
        return True

    def collapse(self, remove, keep):
        shared = self.edge_faces(remove, keep)
        for fi in shared:
            for v in self.faces[fi]:
                self.vfaces[v].discard(fi)
            del self.faces[fi]
        for fi in list(self.vfaces[remove]):
            self.faces[fi] = tuple(keep if v == remove else v for v in self.faces[fi])
            self.vfaces[keep].add(fi)
        self.vfaces[remove].clear()
        self.alive[remove] = False
        self.quadric[keep] += self.quadric[remove]
        for w in self.neighbors(keep):
            self.push(keep, w)

    def run(self, target):
        edges = set()
        for a, b, c in self.faces.values():
            for u, v in ((a, b), (b, c), (c, a)):
                edges.add((min(u, v), max(u, v)))
        for a, b in sorted(edges):
            self.push(a, b)
        count = int(self.alive.sum())
        while count > target and self.heap:
            c, a, b, keep, stamp = heapq.heappop(self.heap)
            if self.version.get((a, b)) != stamp or not (self.alive[a] and self.alive[b]):
                continue
            remove = b if keep == a else a
            if not self.legal(remove, keep):
                continue
            self.collapse(remove, keep)
            count -= 1
        return count


def decimate(mesh, target_count):
    """Quadric-error edge collapse down to ``target_count`` vertices.

    Returns ``(coarse, down, kept)`` where ``kept`` lists the surviving
    original indices in ascending order and ``down`` selects them.
    Stops early (with a warning) if no legal collapse remains.
    """
    n = mesh.n_vertices
    target_count = int(target_count)
    if not 3 <= target_count <= n:
        raise ContractViolation(f"target count {target_count} outside [3, {n}]")
    if target_count == n:
        kept = np.arange(n)
        return mesh, SparseMatrix.identity(n), kept
    dec = _Decimator(mesh)
    achieved = dec.run(target_count)
    if achieved != target_count:
        warnings.warn(
            f"decimation stopped at {achieved} vertices (target {target_count}): no legal edge left",
            RuntimeWarning,
            stacklevel=2,
        )
    kept = np.flatnonzero(dec.alive)
    remap = np.full(n, -1, dtype=np.int64)
    remap[kept] = np.arange(kept.size)
    faces = np.array([remap[list(f)] for _, f in sorted(dec.faces.items())], dtype=np.int64)
    coarse = Mesh(mesh.vertices[kept], faces.reshape(-1, 3))
    down = SparseMatrix.from_triplets((kept.size, n), np.arange(kept.size), kept, np.ones(kept.size))
    return coarse, down, kept


def barycentric_up(coarse, fine, kept):
    """Up-sampling matrix (fine N x coarse N).

    Retained vertices copy their coarse counterpart; every other fine vertex
    takes the barycentric coordinates of its closest point on the nearest
    coarse triangle.
    """
    if len(coarse.faces) == 0:
        raise ContractViolation("coarse mesh has no faces")
    kept = np.asarray(kept, dtype=np.int64)
    nf, nc = fine.n_vertices, coarse.n_vertices
    if kept.size != nc:
        raise ContractViolation(f"kept has {kept.size} entries for {nc} coarse vertices")
    rows, cols, vals = [kept], [np.arange(nc)], [np.ones(nc)]
    others = np.setdiff1d(np.arange(nf), kept)
    if others.size:
        tri, bary = kernels.closest_triangles(fine.vertices[others], coarse.vertices, coarse.faces)
        bary = np.clip(bary, 0.0, None)
        bary /= bary.sum(axis=1, keepdims=True)
        rows.append(np.repeat(others, 3))
        cols.append(coarse.faces[tri].ravel())
        vals.append(bary.ravel())
    return SparseMatrix.from_triplets(
        (nf, nc), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


@dataclass(frozen=True)
class Hierarchy:
    meshes: tuple  # level 0 is the full-resolution template
    laplacians: tuple  # LaplacianBundle per level
    down: tuple  # level l -> l+1
    up: tuple  # level l+1 -> l
    kept: tuple  # indices into level l retained at level l+1

    @property
    def n_levels(self):
        return len(self.meshes)

    @property
    def sizes(self):
        return [m.n_vertices for m in self.meshes]

    def upsample_to_fine(self, values, level=None):
        """Carry per-vertex values from ``level`` (default: coarsest) to level 0."""
        level = self.n_levels - 1 if level is None else level
        out = np.asarray(values, dtype=np.float64)
        for ell in range(level - 1, -1, -1):
            out = self.up[ell].matmul(out)
        return out


def build_hierarchy(template, levels=4, factor=4.0):
    """Decimate ``levels`` times, each to ``ceil(N / factor)`` vertices."""
    if levels < 1:
        raise ContractViolation("levels must be at least 1")
    if not factor > 1:
        raise ContractViolation("factor must exceed 1")
    meshes, downs, ups, kepts = [template], [], [], []
    current = template
    for ell in range(levels):
        target = math.ceil(current.n_vertices / factor)
        if target < 3 or len(current.faces) == 0:
            raise ContractViolation(
                f"template too small: level {ell + 1} would need {target} vertices "
                f"from {current.n_vertices}"
            )
        coarse, down, kept = decimate(current, target)
        up = barycentric_up(coarse, current, kept)
        log.info("level %d: %d -> %d vertices", ell + 1, current.n_vertices, coarse.n_vertices)
        meshes.append(coarse)
        downs.append(down)
        ups.append(up)
        kepts.append(kept)
        current = coarse
    laps = tuple(laplacian_bundle(m) for m in meshes)
    return Hierarchy(tuple(meshes), laps, tuple(downs), tuple(ups), tuple(kepts))
