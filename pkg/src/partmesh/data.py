"""Datasets: the synthetic face generator and registered-mesh directories."""
import logging
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParseError
from .mesh import Mesh, grid_mesh, read_obj, save_obj

log = logging.getLogger(__name__)

N_BUMPS = 8
BUMP_SIGMA = 0.15
BUMP_AMPLITUDE = 0.05
TRAIN_FRACTION = 0.89


def face_template(rows=40, cols=32):
    """A smooth face-like height field on a rows x cols grid (1280 vertices by default).

    Coordinates span roughly [-0.8, 0.8] x [-1, 1] x [0, 0.9].
    """
    grid = grid_mesh(rows, cols, width=1.6, height=2.0)
    x, y = grid.vertices[:, 0], grid.vertices[:, 1]
    dome = 0.6 * np.sqrt(np.clip(1.0 - (x / 0.95) ** 2 - (y / 1.15) ** 2, 0.0, None))
    nose = 0.25 * np.exp(-(x**2 / 0.012 + (y + 0.02) ** 2 / 0.08))
    eyes = -0.08 * (np.exp(-((x - 0.33) ** 2 + (y - 0.28) ** 2) / 0.015)
                    + np.exp(-((x + 0.33) ** 2 + (y - 0.28) ** 2) / 0.015))
    brow = 0.05 * np.exp(-((y - 0.45) ** 2) / 0.01) * np.exp(-(x**2) / 0.3)
    mouth = -0.04 * np.exp(-(x**2 / 0.05 + (y + 0.48) ** 2 / 0.004))
    chin = 0.06 * np.exp(-(x**2 / 0.05 + (y + 0.78) ** 2 / 0.02))
    z = dome + nose + eyes + brow + mouth + chin
    return grid.with_vertices(np.stack([x, y, z], axis=1))


def vertex_normals(mesh):
    v, f = mesh.vertices, mesh.faces
    fn = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    n = np.zeros_like(v)
    for k in range(3):
        np.add.at(n, f[:, k], fn)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)


def farthest_points(points, count):
    """Greedy farthest-point sample, starting from the point nearest the centroid."""
    d0 = ((points - points.mean(axis=0)) ** 2).sum(axis=1)
    chosen = [int(np.argmin(d0))]
    dist = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < min(count, len(points)):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, ((points - points[nxt]) ** 2).sum(axis=1))
    return np.array(chosen)


def bump_basis(template, n_bumps=N_BUMPS, sigma_frac=BUMP_SIGMA):
    """(n_bumps, N, 3) displacement fields: Gaussian bumps along vertex normals."""
    v = template.vertices
    diag = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
    sigma = sigma_frac * diag
    centers = v[farthest_points(v, n_bumps)]
    normals = vertex_normals(template)
    d2 = ((v[None, :, :] - centers[:, None, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * sigma**2))[:, :, None] * normals[None], diag


@dataclass
class Dataset:
    template: Mesh
    samples: np.ndarray  # (M, N0, 3)
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.train = np.asarray(self.train, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)
        n0 = self.template.n_vertices
        if self.samples.ndim != 3 or self.samples.shape[1:] != (n0, 3):
            raise ContractViolation(f"samples must be (M, {n0}, 3), got {self.samples.shape}")
        if np.intersect1d(self.train, self.test).size:
            raise ContractViolation("train and test splits overlap")

    def mesh(self, i):
        return self.template.with_vertices(self.samples[i])

    @property
    def train_samples(self):
        return self.samples[self.train]

    @property
    def test_samples(self):
        return self.samples[self.test]


def split_indices(n, seed, train_fraction=TRAIN_FRACTION):
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def synth_faces(n, template, seed=0, coefficients=None):
    """Template plus random combinations of 8 smooth bump fields.

    Coefficients are drawn uniform in +-5% of the bounding-box diagonal
    unless ``coefficients`` (n, 8) is given.
    """
    if n < 2:
        raise ContractViolation("need at least 2 samples")
    if template.n_vertices < 100:
        warnings.warn(f"template has only {template.n_vertices} vertices", RuntimeWarning,
                      stacklevel=2)
    basis, diag = bump_basis(template)
    rng = np.random.default_rng(seed)
    if coefficients is None:
        coefficients = rng.uniform(-BUMP_AMPLITUDE, BUMP_AMPLITUDE, (n, N_BUMPS)) * diag
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (n, N_BUMPS):
        raise ContractViolation(f"coefficients must be ({n}, {N_BUMPS})")
    samples = template.vertices[None] + np.einsum("sm,mni->sni", coefficients, basis)
    train, test = split_indices(n, seed)
    return Dataset(template, samples, train, test)


# ---------------------------------------------------------------- directories


def save_dataset(dataset, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    save_obj(os.path.join(out_dir, "template.obj"), dataset.template)
    split = {int(i): "train" for i in dataset.train}
    split.update({int(i): "test" for i in dataset.test})
    with open(os.path.join(out_dir, "split.csv"), "w", encoding="utf-8") as fh:
        fh.write("index,file,split\n")
        for i in range(len(dataset.samples)):
            name = f"sample_{i:04d}.obj"
            save_obj(os.path.join(out_dir, name), dataset.mesh(i))
            fh.write(f"{i},{name},{split.get(i, 'none')}\n")


def load_dataset(data_dir):
    """Read a directory written by :func:`save_dataset`.

    Without ``split.csv``, every ``*.obj`` except ``template.obj`` is a
    training sample and the first one doubles as the template if needed.
    """
    split_path = os.path.join(data_dir, "split.csv")
    template_path = os.path.join(data_dir, "template.obj")
    if os.path.exists(split_path):
        names, train, test = [], [], []
        with open(split_path, encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("index"):
                raise ParseError("split.csv: missing header", 1)
            for lineno, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                try:
                    idx, name, which = line.strip().split(",")
                    idx = int(idx)
                except ValueError:
                    raise ParseError(f"split.csv: bad row {line.strip()!r}", lineno) from None
                names.append(name)
                (train if which == "train" else test if which == "test" else []).append(idx)
    else:
        names = sorted(f for f in os.listdir(data_dir)
                       if f.endswith(".obj") and f != "template.obj")
        train, test = list(range(len(names))), []
    if not names:
        raise ContractViolation(f"no meshes found in {data_dir}")
    meshes = [read_obj(os.path.join(data_dir, n)) for n in names]
    template = read_obj(template_path) if os.path.exists(template_path) else meshes[0]
    for name, m in zip(names, meshes):
        if m.vertices.shape != template.vertices.shape or not np.array_equal(m.faces, template.faces):
            raise ContractViolation(f"{name} is not in correspondence with the template")
    return Dataset(template, np.stack([m.vertices for m in meshes]), train, test)


def load_mesh_dir(data_dir):
    """All ``*.obj`` files in a directory, sorted by name."""
    names = sorted(f for f in os.listdir(data_dir) if f.endswith(".obj"))
    return [read_obj(os.path.join(data_dir, n)) for n in names], names
