"""The locally weighted mesh autoencoder.

Pipeline for one mesh::

    vertices -> [cheb conv + ReLU, down-sample] x L -> flatten -> FC -> z
    z -> K projection matrices -> part encodings p_1..p_K
    latent map M[n, :] = sum_k W[n, k] p_k          (W: local weights, N_L x K)
    M -> per-row FC -> [up-sample, cheb conv (+ReLU)] x L -> vertices

Activations are laid out (vertices, batch, features). Every forward pass runs
on a :class:`~partmesh.autodiff.Tape`; inference just never calls backward.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .chebconv import tape_cheb_conv
from .config import RunConfig
from .errors import ContractViolation, NumericOverflowError, TrainingDiverged
from .mesh import Mesh
from .nmf import LocalWeights, compute_local_weights
from .optim import OptimizerState, learning_rate, sgd_momentum_step
from .sampling import Hierarchy, build_hierarchy

log = logging.getLogger(__name__)


def encoder_widths(filters, n_transitions):
    """Output widths of the encoder convolutions, one per hierarchy transition.

    The last entry of ``filters`` is always the coarsest width; the rest are
    taken from the front: (16, 16, 16, 32) with 2 transitions gives (16, 32).
    """
    filters = tuple(filters)
    if n_transitions < 1:
        raise ContractViolation("hierarchy needs at least one transition")
    head = list(filters[:-1])
    while len(head) < n_transitions - 1:
        head.append(head[-1] if head else filters[-1])
    return tuple(head[: n_transitions - 1]) + (filters[-1],)


@dataclass
class ModelParams:
    arrays: dict  # name -> float64 array; insertion order is the init order
    z_dim: int
    n_parts: int
    cheb_order: int
    widths: tuple
    use_projection: bool = True

    @property
    def n_transitions(self):
        return len(self.widths)

    def copy(self):
        return ModelParams({k: v.copy() for k, v in self.arrays.items()}, self.z_dim,
                           self.n_parts, self.cheb_order, self.widths, self.use_projection)

    def n_values(self):
        return sum(a.size for a in self.arrays.values())


def layer_shapes(sizes, z_dim, n_parts, cheb_order, widths, use_projection=True):
    """Ordered ``name -> (shape, fan_in, fan_out)`` for every trainable tensor."""
    L = len(widths)
    if len(sizes) != L + 1:
        raise ContractViolation(f"{len(sizes)} levels do not fit {L} encoder widths")
    out = {}
    f_in = 3
    for i, w in enumerate(widths):
        out[f"enc{i}.theta"] = ((cheb_order, f_in, w), cheb_order * f_in, w)
        out[f"enc{i}.bias"] = ((w,), None, None)
        f_in = w
    flat = sizes[-1] * widths[-1]
    out["enc_fc.weight"] = ((flat, z_dim), flat, z_dim)
    out["enc_fc.bias"] = ((z_dim,), None, None)
    if use_projection:
        for k in range(n_parts):
            out[f"proj{k}"] = ((z_dim, z_dim), z_dim, z_dim)
    out["dec_fc.weight"] = ((z_dim, widths[-1]), z_dim, widths[-1])
    out["dec_fc.bias"] = ((widths[-1],), None, None)
    rev = list(reversed(widths)) + [3]
    for j in range(L):
        out[f"dec{j}.theta"] = ((cheb_order, rev[j], rev[j + 1]), cheb_order * rev[j], rev[j + 1])
        out[f"dec{j}.bias"] = ((rev[j + 1],), None, None)
    return out


def init_params(hierarchy, z_dim=64, n_parts=4, cheb_order=6, filters=(16, 16, 16, 32),
                seed=0, use_projection=True):
    """Glorot-uniform weights, zero biases.

    Draws come from one generator in this order: encoder convolutions,
    encoder FC, projections, decoder FC, decoder convolutions. A Chebyshev
    layer counts ``K * F_in`` as its fan-in.
    """
    widths = encoder_widths(filters, hierarchy.n_levels - 1)
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, (shape, fan_in, fan_out) in layer_shapes(
        hierarchy.sizes, z_dim, n_parts, cheb_order, widths, use_projection
    ).items():
        if fan_in is None:
            arrays[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-limit, limit, shape)
    return ModelParams(arrays, z_dim, n_parts, cheb_order, widths, use_projection)


def template_center(hierarchy):
    return hierarchy.meshes[0].vertices.mean(axis=0)


# ---------------------------------------------------------------- tape graph


def _check_params(params, hierarchy):
    if params.n_transitions != hierarchy.n_levels - 1:
        raise ContractViolation("parameters were built for a different hierarchy depth")
    expected = layer_shapes(hierarchy.sizes, params.z_dim, params.n_parts, params.cheb_order,
                            params.widths, params.use_projection)
    for name, (shape, _, _) in expected.items():
        if name not in params.arrays or params.arrays[name].shape != shape:
            raise ContractViolation(f"parameter {name} missing or mis-shaped for this hierarchy")


def graph_encode(tape, p, hierarchy, x):
    """x: node (N0, B, 3) centered coordinates -> z: node (B, Z)."""
    L = len(hierarchy.down)
    for i in range(L):
        x = tape_cheb_conv(tape, p[f"enc{i}.theta"], p[f"enc{i}.bias"],
                           hierarchy.laplacians[i].scaled, x)
        x = tape.relu(x)
        x = tape.spmm(hierarchy.down[i], x)
    n, b, f = x.shape
    flat = tape.reshape(tape.transpose(x, (1, 0, 2)), (b, n * f))
    return tape.add_bias(tape.matmul(flat, p["enc_fc.weight"]), p["enc_fc.bias"])


def graph_parts(tape, p, z, n_parts, use_projection):
    """K part encodings ``P_k z``, each a (B, Z) node."""
    if not use_projection:
        return [z] * n_parts
    return [tape.matmul(z, tape.transpose(p[f"proj{k}"])) for k in range(n_parts)]


def graph_latent_map(tape, parts, weights):
    """``M[n, b, :] = sum_k W[n, k] * part_k[b, :]`` as an (N_L, B, Z) node."""
    W = weights.W if isinstance(weights, LocalWeights) else np.asarray(weights, dtype=np.float64)
    if W.shape[1] != len(parts):
        raise ContractViolation(f"{len(parts)} part encodings for {W.shape[1]} weight columns")
    total = None
    for k, part in enumerate(parts):
        term = tape.outer(tape.constant(W[:, k]), part)
        total = term if total is None else tape.add(total, term)
    return total


def graph_decode(tape, p, hierarchy, latent):
    """latent: (N_L, B, Z) node -> (N0, B, 3) centered coordinates."""
    L = len(hierarchy.up)
    h = tape.add_bias(tape.matmul(latent, p["dec_fc.weight"]), p["dec_fc.bias"])
    for j in range(L):
        level = L - 1 - j
        h = tape.spmm(hierarchy.up[level], h)
        h = tape_cheb_conv(tape, p[f"dec{j}.theta"], p[f"dec{j}.bias"],
                           hierarchy.laplacians[level].scaled, h)
        if j < L - 1:
            h = tape.relu(h)
    return h


def _leaves(tape, params):
    return {name: tape.leaf(a, name) for name, a in params.arrays.items()}


def _batch_input(hierarchy, batch):
    """(B, N0, 3) raw vertices -> (N0, B, 3) centered."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    n0 = hierarchy.meshes[0].n_vertices
    if x.shape[1:] != (n0, 3):
        raise ContractViolation(f"expected meshes with {n0} vertices, got shape {x.shape[1:]}")
    return (x - template_center(hierarchy)).transpose(1, 0, 2)


def graph_loss(tape, p, params, hierarchy, weights, x, gamma):
    """Returns ``(loss, l1, cycle)`` nodes for a centered batch node x."""
    z = graph_encode(tape, p, hierarchy, x)
    parts = graph_parts(tape, p, z, params.n_parts, params.use_projection)
    recon = graph_decode(tape, p, hierarchy, graph_latent_map(tape, parts, weights))
    l1 = tape.abs_error(recon, x, "mean")
    z2 = graph_encode(tape, p, hierarchy, recon)
    parts2 = graph_parts(tape, p, z2, params.n_parts, params.use_projection)
    cyc = None
    for a, b in zip(parts2, parts):
        term = tape.abs_error(a, b, "mean")
        cyc = term if cyc is None else tape.add(cyc, term)
    cyc = tape.scale(cyc, 1.0 / params.n_parts)
    loss = tape.add(l1, tape.scale(cyc, gamma)) if gamma else l1
    return loss, l1, cyc


# ---------------------------------------------------------------- array API


def encode(params, hierarchy, vertices):
    """Whole-shape latent vector(s): (Z,) for one mesh, (B, Z) for a batch."""
    _check_params(params, hierarchy)
    single = np.ndim(vertices) == 2
    tape = Tape()
    p = {k: tape.constant(v) for k, v in params.arrays.items()}
    z = graph_encode(tape, p, hierarchy, tape.constant(_batch_input(hierarchy, vertices))).value
    return z[0] if single else z


def project_parts(z, params_or_projections, n_parts=None):
    """Part encodings ``P_k z``; returns a (K, Z) array (or (K, B, Z) for a batch)."""
    if isinstance(params_or_projections, ModelParams):
        params = params_or_projections
        if not params.use_projection:
            z = np.asarray(z, dtype=np.float64)
            return np.stack([z] * params.n_parts)
        mats = [params.arrays[f"proj{k}"] for k in range(params.n_parts)]
    else:
        mats = list(params_or_projections)
    z = np.asarray(z, dtype=np.float64)
    return np.stack([z @ m.T for m in mats])


def weighted_latent_map(parts, weights):
    """(N_L, Z) map for parts (K, Z); (N_L, B, Z) for parts (K, B, Z)."""
    parts = np.asarray(parts, dtype=np.float64)
    tape = Tape()
    single = parts.ndim == 2
    nodes = [tape.constant(pk[None] if single else pk) for pk in parts]
    out = graph_latent_map(tape, nodes, weights).value
    return out[:, 0] if single else out


def decode(params, hierarchy, latent_map):
    """Vertices (N0, 3) from an (N_L, Z) latent map (batched: (B, N0, 3))."""
    _check_params(params, hierarchy)
    m = np.asarray(latent_map, dtype=np.float64)
    single = m.ndim == 2
    if single:
        m = m[:, None]
    if m.shape[0] != hierarchy.meshes[-1].n_vertices or m.shape[2] != params.z_dim:
        raise ContractViolation(f"latent map shape {m.shape} does not fit the model")
    tape = Tape()
    p = {k: tape.constant(v) for k, v in params.arrays.items()}
    out = graph_decode(tape, p, hierarchy, tape.constant(m)).value.transpose(1, 0, 2)
    out = out + template_center(hierarchy)
    return out[0] if single else out


def decode_parts(params, hierarchy, weights, parts):
    return decode(params, hierarchy, weighted_latent_map(parts, weights))


def training_loss(params, hierarchy, weights, batch, gamma=0.5):
    """Mean L1 reconstruction error plus ``gamma`` times the cycle loss."""
    _check_params(params, hierarchy)
    tape = Tape()
    p = {k: tape.constant(v) for k, v in params.arrays.items()}
    x = tape.constant(_batch_input(hierarchy, batch))
    loss, _, _ = graph_loss(tape, p, params, hierarchy, weights, x, gamma)
    return float(loss.value)


def loss_and_grads(params, hierarchy, weights, batch, gamma=0.5):
    """``(loss, l1, cycle, grads)`` with grads keyed like ``params.arrays``."""
    _check_params(params, hierarchy)
    tape = Tape()
    p = _leaves(tape, params)
    x = tape.constant(_batch_input(hierarchy, batch))
    loss, l1, cyc = graph_loss(tape, p, params, hierarchy, weights, x, gamma)
    names = list(p)
    grads = tape.backward(loss, [p[n] for n in names])
    return float(loss.value), float(l1.value), float(cyc.value), dict(zip(names, grads))


# ---------------------------------------------------------------- training


@dataclass
class Checkpoint:
    params: ModelParams
    hierarchy: Hierarchy
    local_weights: LocalWeights
    config: RunConfig
    metrics: dict = field(default_factory=lambda: {"l1": [], "cycle": [], "loss": []})

    @property
    def template(self):
        return self.hierarchy.meshes[0]

    def check_mesh(self, mesh):
        """Refuse meshes that are not registered to this checkpoint's template."""
        t = self.template
        verts = mesh.vertices if isinstance(mesh, Mesh) else np.asarray(mesh)
        if verts.shape != t.vertices.shape:
            raise ContractViolation(
                f"mesh has {verts.shape[0]} vertices; checkpoint template has {t.n_vertices}"
            )
        if isinstance(mesh, Mesh) and len(mesh.faces) and not np.array_equal(mesh.faces, t.faces):
            raise ContractViolation("mesh connectivity differs from the checkpoint template")
        return verts


def prepare(template, config, seed=None):
    """Hierarchy and local weights for a template."""
    seed = config.seed if seed is None else seed
    hierarchy = build_hierarchy(template, config.levels, config.factor)
    coarse = hierarchy.meshes[-1]
    if config.no_local_weights:
        weights = LocalWeights.uniform(coarse.n_vertices, config.parts)
    else:
        weights = compute_local_weights(coarse.vertices, config.parts, config.sparsity,
                                        config.nmf_restarts, config.nmf_iters, seed)
    return hierarchy, weights


def train(samples, config, seed=None, hierarchy=None, weights=None, template=None,
          callback=None):
    """Fit the autoencoder on ``samples`` (M, N0, 3) registered to ``template``.

    Each epoch shuffles with a generator seeded once from ``seed``; per-epoch
    mean L1 and cycle losses land in ``Checkpoint.metrics``.
    """
    seed = config.seed if seed is None else seed
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 3 or len(samples) == 0:
        raise ContractViolation("samples must be a non-empty (M, N0, 3) array")
    if hierarchy is None or weights is None:
        if template is None:
            raise ContractViolation("need a template (or a prebuilt hierarchy and weights)")
        hierarchy, weights = prepare(template, config, seed)
    if weights.n_rows != hierarchy.meshes[-1].n_vertices or weights.n_parts != config.parts:
        raise ContractViolation("local weights do not match hierarchy/parts")
    init_seed, shuffle_seed = np.random.SeedSequence(seed).spawn(2)
    params = init_params(hierarchy, config.z_dim, config.parts, config.cheb_order,
                         config.filters, np.random.default_rng(init_seed),
                         use_projection=not config.no_projection)
    shuffle = np.random.default_rng(shuffle_seed)
    state = OptimizerState(config.momentum)
    ckpt = Checkpoint(params, hierarchy, weights, config.replace(seed=seed))
    last_good = None
    m = len(samples)
    for epoch in range(config.epochs):
        lr = learning_rate(epoch, config.lr, config.lr_decay)
        order = shuffle.permutation(m)
        sums = np.zeros(3)
        try:
            for start in range(0, m, config.batch_size):
                idx = order[start:start + config.batch_size]
                loss, l1, cyc, grads = loss_and_grads(params, hierarchy, weights, samples[idx],
                                                      config.gamma_cycle)
                if not np.isfinite(loss):
                    raise NumericOverflowError(f"non-finite loss at epoch {epoch + 1}")
                sums += len(idx) * np.array([loss, l1, cyc])
                new_arrays, state = sgd_momentum_step(params.arrays, grads, state, lr)
                params = ModelParams(new_arrays, params.z_dim, params.n_parts, params.cheb_order,
                                     params.widths, params.use_projection)
        except (NumericOverflowError, FloatingPointError) as exc:
            raise TrainingDiverged(f"training diverged in epoch {epoch + 1}: {exc}",
                                   checkpoint=last_good, epoch=epoch + 1) from exc
        state.epoch = epoch + 1
        loss, l1, cyc = sums / m
        ckpt.metrics["loss"].append(float(loss))
        ckpt.metrics["l1"].append(float(l1))
        ckpt.metrics["cycle"].append(float(cyc))
        ckpt = Checkpoint(params, hierarchy, weights, ckpt.config, ckpt.metrics)
        last_good = Checkpoint(params.copy(), hierarchy, weights, ckpt.config,
                               {k: list(v) for k, v in ckpt.metrics.items()})
        log.info("epoch %d lr %.6g loss %.6g l1 %.6g cycle %.6g", epoch + 1, lr, loss, l1, cyc)
        if callback is not None:
            callback(epoch + 1, ckpt)
    return ckpt


# ---------------------------------------------------------------- editing


def part_encodings(ckpt, vertices):
    """(K, Z) part encodings of one mesh."""
    z = encode(ckpt.params, ckpt.hierarchy, ckpt.check_mesh(vertices))
    return project_parts(z, ckpt.params)


def reconstruct(ckpt, mesh):
    verts = ckpt.check_mesh(mesh)
    out = decode_parts(ckpt.params, ckpt.hierarchy, ckpt.local_weights,
                       part_encodings(ckpt, verts))
    return ckpt.template.with_vertices(out)


def _blend_decode(ckpt, src_parts, tgt_parts, alphas):
    parts = np.array([(1.0 - a) * s + a * t for s, t, a in zip(src_parts, tgt_parts, alphas)])
    out = decode_parts(ckpt.params, ckpt.hierarchy, ckpt.local_weights, parts)
    return ckpt.template.with_vertices(out)


def interpolate_part(ckpt, source, target, part, alpha):
    """Blend part ``part`` of the source's encodings toward the target's."""
    K = ckpt.params.n_parts
    if not 0 <= part < K:
        raise ContractViolation(f"part {part} out of range for {K} parts")
    alpha = min(max(float(alpha), 0.0), 1.0)
    src = part_encodings(ckpt, source)
    tgt = part_encodings(ckpt, target)
    alphas = [alpha if k == part else 0.0 for k in range(K)]
    return _blend_decode(ckpt, src, tgt, alphas)


def interpolate_all(ckpt, source, target, alpha):
    """Every part blended by the same ``alpha``."""
    K = ckpt.params.n_parts
    alpha = min(max(float(alpha), 0.0), 1.0)
    return _blend_decode(ckpt, part_encodings(ckpt, source), part_encodings(ckpt, target),
                         [alpha] * K)


def swap_parts(ckpt, source, target, parts):
    """Take the listed parts from ``target`` and the rest from ``source``."""
    K = ckpt.params.n_parts
    parts = sorted(set(int(k) for k in parts))
    if not parts:
        raise ContractViolation("part subset must be non-empty")
    if parts[0] < 0 or parts[-1] >= K:
        raise ContractViolation(f"part index out of range for {K} parts")
    alphas = [1.0 if k in parts else 0.0 for k in range(K)]
    return _blend_decode(ckpt, part_encodings(ckpt, source), part_encodings(ckpt, target), alphas)
