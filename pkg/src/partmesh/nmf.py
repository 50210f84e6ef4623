"""Local weights from sparse non-negative matrix factorization.

The coarsest template's vertex matrix V (P x 3, shifted into [0, 1]) is
factored as V ~ W H with an L1 penalty on H. Each column of W then says how
strongly every coarse vertex belongs to one part.
"""
import csv
import io
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

log = logging.getLogger(__name__)

CLAMP = 1e-12
DEFAULT_SPARSITY = 7.5
DEFAULT_RESTARTS = 5
DEFAULT_ITERS = 2000
INNER_UPDATES = 20


def nonneg_embed(vertices):
    """Min-max scale each column to [0, 1]; a constant column becomes zeros."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 1:
        raise ContractViolation("expected a non-empty (P, d) array")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("vertices must be finite")
    lo = v.min(axis=0)
    span = v.max(axis=0) - lo
    out = np.zeros_like(v)
    ok = span > 0
    out[:, ok] = (v[:, ok] - lo[ok]) / span[ok]
    return out


@dataclass
class NmfRun:
    W: np.ndarray
    H: np.ndarray
    objective_trace: np.ndarray
    seed: int = 0
    sparsity: float = 0.0


def nmf_objective(V, W, H, lam):
    r = V - W @ H
    return float((r * r).sum() + lam * H.sum())


def sparse_nmf(V, K, lam=DEFAULT_SPARSITY, iters=DEFAULT_ITERS, seed=0, inner=INNER_UPDATES,
               callback=None):
    """Multiplicative updates for ``||V - WH||_F^2 + lam * sum(H)``.

    Each iteration applies ``inner`` H updates and then ``inner`` W updates,
    reusing the Gram products (Gillis & Glineur's accelerated scheme; every
    single update is still monotone). Entries are clamped at 1e-12 so no
    factor entry gets stuck at exactly zero. ``callback(it, W, H)``, when
    given, sees the factors after every iteration.
    """
    V = np.asarray(V, dtype=np.float64)
    if K < 1 or lam < 0 or iters < 1:
        raise ContractViolation("need K >= 1, lambda >= 0, iters >= 1")
    if np.any(V < 0) or not np.all(np.isfinite(V)):
        raise ContractViolation("V must be finite and non-negative")
    P, m = V.shape
    rng = np.random.default_rng(seed)
    scale = np.sqrt(V.mean() / K) if V.mean() > 0 else 1.0
    W = np.maximum(rng.uniform(0.0, 1.0, (P, K)) * scale, CLAMP)
    H = np.maximum(rng.uniform(0.0, 1.0, (K, m)) * scale, CLAMP)
    trace = np.empty(iters)
    half = 0.5 * lam
    for it in range(iters):
        WtV, WtW = W.T @ V, W.T @ W
        for _ in range(inner):
            H *= WtV / (WtW @ H + half)
            np.maximum(H, CLAMP, out=H)
        VHt, HHt = V @ H.T, H @ H.T
        for _ in range(inner):
            W *= VHt / (W @ HHt)
            np.maximum(W, CLAMP, out=W)
        trace[it] = nmf_objective(V, W, H, lam)
        if callback is not None:
            callback(it, W, H)
    return NmfRun(W, H, trace, seed, float(lam))


def disjointness(W):
    """Mean over column pairs of ``1 - cos(w_a, w_b)``."""
    norms = np.linalg.norm(W, axis=0)
    K = W.shape[1]
    if K < 2:
        return 0.0
    scores = [
        1.0 - float(W[:, a] @ W[:, b]) / (norms[a] * norms[b])
        for a, b in itertools.combinations(range(K), 2)
    ]
    return float(np.mean(scores))


@dataclass
class LocalWeights:
    W: np.ndarray  # (P, K), each column peaks at 1
    seed: int = 0
    sparsity: float = 0.0
    iterations: int = 0
    objective: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def n_parts(self):
        return self.W.shape[1]

    @property
    def n_rows(self):
        return self.W.shape[0]

    @classmethod
    def uniform(cls, P, K):
        """All-ones weights (used when local weighting is switched off)."""
        return cls(np.ones((P, K)), meta={"uniform": True})


def _has_dead_column(W):
    colmax = W.max(axis=0)
    return bool(np.any(colmax <= 1e-9 * max(float(colmax.max()), CLAMP)))


def select_local_weights(runs):
    """Pick the run whose W columns overlap least, then peak-normalize them."""
    if not runs:
        raise ContractViolation("no NMF runs to select from")
    shapes = {r.W.shape for r in runs}
    if len(shapes) != 1:
        raise ContractViolation(f"runs disagree on W shape: {sorted(shapes)}")
    best, best_score = None, -np.inf
    for run in runs:
        if _has_dead_column(run.W):
            log.info("excluding NMF run seed=%s: all-zero column", run.seed)
            continue
        score = disjointness(run.W)
        if score > best_score:
            best, best_score = run, score
    if best is None:
        raise ContractViolation("every NMF run has an all-zero column")
    W = best.W / best.W.max(axis=0, keepdims=True)
    return LocalWeights(
        W,
        seed=best.seed,
        sparsity=best.sparsity,
        iterations=len(best.objective_trace),
        objective=float(best.objective_trace[-1]),
        meta={"disjointness": best_score},
    )


def compute_local_weights(vertices, K=4, lam=DEFAULT_SPARSITY, restarts=DEFAULT_RESTARTS,
                          iters=DEFAULT_ITERS, seed=0):
    """Embed, factor with ``restarts`` seeds (seed, seed+1, ...), select."""
    V = nonneg_embed(vertices)
    runs = [sparse_nmf(V, K, lam, iters, seed + r) for r in range(restarts)]
    return select_local_weights(runs)


def weights_to_csv(weights):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"part_{k}" for k in range(weights.n_parts)])
    for row in weights.W.tolist():
        writer.writerow([repr(v) for v in row])
    return buf.getvalue()


def weights_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise ContractViolation("weights CSV has no data rows")
    return LocalWeights(np.array([[float(v) for v in r] for r in rows[1:]]))
