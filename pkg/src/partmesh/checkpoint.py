"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"MPGC"  u32 version  u32 n_sections
    n_sections x ( u16 name_len, name (utf-8), u64 payload_len, payload )

Text sections (``config``, ``model``, ``weights.meta``) hold UTF-8
``key = value`` lines. Array sections (``hierarchy``, ``weights``,
``params``, ``metrics``) hold::

    u32 n_arrays
    n_arrays x ( u16 name_len, name, u8 dtype (0 = f64, 1 = i64), u8 ndim,
                 ndim x u64 dim, raw little-endian data )
"""
import io
import struct

import numpy as np

from .config import RunConfig
from .errors import CheckpointError
from .mesh import LaplacianBundle, Mesh
from .model import Checkpoint, ModelParams
from .nmf import LocalWeights
from .sampling import Hierarchy
from .sparse import SparseMatrix

MAGIC = b"MPGC"
VERSION = 1
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}


def _pack_arrays(arrays):
    out = io.BytesIO()
    out.write(struct.pack("<I", len(arrays)))
    for name, a in arrays.items():
        a = np.asarray(a)
        code = 1 if np.issubdtype(a.dtype, np.integer) else 0
        data = np.ascontiguousarray(a, dtype=_DTYPES[code])
        raw = name.encode("utf-8")
        out.write(struct.pack("<H", len(raw)) + raw)
        out.write(struct.pack("<BB", code, data.ndim))
        out.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        out.write(data.tobytes())
    return out.getvalue()


def _unpack_arrays(buf):
    view = memoryview(buf)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated array section")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        if code not in _DTYPES:
            raise CheckpointError(f"unknown dtype code {code} for {name}")
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        dtype = _DTYPES[code]
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(bytes(take(size * dtype.itemsize)), dtype=dtype).reshape(shape)
        arrays[name] = arr.astype(np.float64 if code == 0 else np.int64)
    return arrays


def _text(d):
    return "".join(f"{k} = {v}\n" for k, v in d.items()).encode("utf-8")


def _parse_text(raw):
    out = {}
    for line in raw.decode("utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _sparse_arrays(prefix, s, into):
    into[f"{prefix}.shape"] = np.array(s.shape, dtype=np.int64)
    into[f"{prefix}.indptr"] = s.indptr
    into[f"{prefix}.indices"] = s.indices
    into[f"{prefix}.data"] = s.data


def _sparse_from(prefix, arrays):
    try:
        return SparseMatrix(arrays[f"{prefix}.shape"], arrays[f"{prefix}.indptr"],
                            arrays[f"{prefix}.indices"], arrays[f"{prefix}.data"])
    except KeyError as exc:
        raise CheckpointError(f"missing hierarchy array {exc}") from None


def _hierarchy_arrays(h):
    out = {"n_levels": np.array([h.n_levels], dtype=np.int64)}
    for i, (m, lap) in enumerate(zip(h.meshes, h.laplacians)):
        out[f"mesh{i}.vertices"] = m.vertices
        out[f"mesh{i}.faces"] = m.faces
        out[f"lap{i}.lambda_max"] = np.array([lap.lambda_max])
        _sparse_arrays(f"lap{i}.adjacency", lap.adjacency, out)
        _sparse_arrays(f"lap{i}.laplacian", lap.laplacian, out)
        _sparse_arrays(f"lap{i}.scaled", lap.scaled, out)
    for i, (d, u, k) in enumerate(zip(h.down, h.up, h.kept)):
        _sparse_arrays(f"down{i}", d, out)
        _sparse_arrays(f"up{i}", u, out)
        out[f"kept{i}"] = np.asarray(k, dtype=np.int64)
    return out


def _hierarchy_from(arrays):
    n = int(arrays["n_levels"][0])
    meshes, laps = [], []
    for i in range(n):
        meshes.append(Mesh(arrays[f"mesh{i}.vertices"], arrays[f"mesh{i}.faces"]))
        laps.append(LaplacianBundle(
            _sparse_from(f"lap{i}.adjacency", arrays),
            _sparse_from(f"lap{i}.laplacian", arrays),
            float(arrays[f"lap{i}.lambda_max"][0]),
            _sparse_from(f"lap{i}.scaled", arrays),
        ))
    down = tuple(_sparse_from(f"down{i}", arrays) for i in range(n - 1))
    up = tuple(_sparse_from(f"up{i}", arrays) for i in range(n - 1))
    kept = tuple(arrays[f"kept{i}"] for i in range(n - 1))
    return Hierarchy(tuple(meshes), tuple(laps), down, up, kept)


def dumps(ckpt):
    p = ckpt.params
    w = ckpt.local_weights
    model_meta = {
        "z_dim": p.z_dim, "n_parts": p.n_parts, "cheb_order": p.cheb_order,
        "widths": ",".join(str(x) for x in p.widths), "use_projection": int(p.use_projection),
        "param_names": ",".join(p.arrays),
    }
    weights_meta = {
        "seed": w.seed, "sparsity": repr(float(w.sparsity)), "iterations": w.iterations,
        "objective": repr(float(w.objective)), "uniform": int(bool(w.meta.get("uniform"))),
    }
    sections = [
        ("config", ckpt.config.to_text().encode("utf-8")),
        ("model", _text(model_meta)),
        ("hierarchy", _pack_arrays(_hierarchy_arrays(ckpt.hierarchy))),
        ("weights", _pack_arrays({"W": w.W})),
        ("weights.meta", _text(weights_meta)),
        ("params", _pack_arrays(p.arrays)),
        ("metrics", _pack_arrays({k: np.asarray(v, dtype=np.float64)
                                  for k, v in ckpt.metrics.items()})),
    ]
    out = io.BytesIO()
    out.write(MAGIC + struct.pack("<II", VERSION, len(sections)))
    for name, payload in sections:
        raw = name.encode("utf-8")
        out.write(struct.pack("<H", len(raw)) + raw + struct.pack("<Q", len(payload)))
        out.write(payload)
    return out.getvalue()


def loads(data):
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    if len(data) < 12:
        raise CheckpointError("truncated header")
    version, count = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    sections = {}
    for _ in range(count):
        try:
            (nlen,) = struct.unpack("<H", data[pos:pos + 2])
            name = data[pos + 2:pos + 2 + nlen].decode("utf-8")
            pos += 2 + nlen
            (plen,) = struct.unpack("<Q", data[pos:pos + 8])
        except struct.error:
            raise CheckpointError("truncated section header") from None
        pos += 8
        if pos + plen > len(data):
            raise CheckpointError(f"section {name!r} is truncated")
        sections[name] = data[pos:pos + plen]
        pos += plen
    missing = {"config", "model", "hierarchy", "weights", "params"} - sections.keys()
    if missing:
        raise CheckpointError(f"missing sections: {sorted(missing)}")

    config = RunConfig.from_text(sections["config"].decode("utf-8"))
    meta = _parse_text(sections["model"])
    arrays = _unpack_arrays(sections["params"])
    names = meta["param_names"].split(",")
    if set(names) != set(arrays):
        raise CheckpointError("parameter list does not match the stored arrays")
    params = ModelParams(
        {n: arrays[n] for n in names},
        int(meta["z_dim"]), int(meta["n_parts"]), int(meta["cheb_order"]),
        tuple(int(x) for x in meta["widths"].split(",")), bool(int(meta["use_projection"])),
    )
    hierarchy = _hierarchy_from(_unpack_arrays(sections["hierarchy"]))
    wmeta = _parse_text(sections.get("weights.meta", b""))
    weights = LocalWeights(
        _unpack_arrays(sections["weights"])["W"],
        seed=int(wmeta.get("seed", 0)), sparsity=float(wmeta.get("sparsity", 0.0)),
        iterations=int(wmeta.get("iterations", 0)),
        objective=float(wmeta.get("objective", "nan")),
        meta={"uniform": True} if wmeta.get("uniform") == "1" else {},
    )
    metrics = {k: v.tolist() for k, v in _unpack_arrays(sections.get("metrics", b"\0\0\0\0")).items()}
    ckpt = Checkpoint(params, hierarchy, weights, config, metrics)
    _validate(ckpt)
    return ckpt


def _validate(ckpt):
    from .model import _check_params

    try:
        _check_params(ckpt.params, ckpt.hierarchy)
    except ValueError as exc:
        raise CheckpointError(f"inconsistent checkpoint: {exc}") from None
    if ckpt.local_weights.W.shape != (ckpt.hierarchy.meshes[-1].n_vertices, ckpt.params.n_parts):
        raise CheckpointError("local weights do not match the coarsest level / part count")


def save(path, ckpt):
    with open(path, "wb") as fh:
        fh.write(dumps(ckpt))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
