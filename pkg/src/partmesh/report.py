"""PCA diversity reports and the part-locality measurement."""
import csv
import io

import numpy as np

from .errors import ContractViolation
from .model import encode, interpolate_part, swap_parts


def pca_embed(vectors):
    """Project rows onto the top two principal axes of their covariance.

    Each axis is signed so its largest-magnitude component is positive.
    Rank-deficient directions come out as zeros.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ContractViolation("need at least two vectors")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:2]
    out = np.zeros((x.shape[0], 2))
    scale = max(float(evals.max()), 0.0)
    for j, idx in enumerate(order):
        if evals[idx] <= 1e-12 * scale or scale == 0.0:
            continue
        v = evecs[:, idx]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out[:, j] = centered @ v
    return out


def covariance_ellipse(points, n_sigma=2.0):
    """Center, semi-axes (major, minor), angle in radians and area."""
    p = np.asarray(points, dtype=np.float64)
    center = p.mean(axis=0)
    if len(p) < 2:
        return center, (0.0, 0.0), 0.0, 0.0
    cov = np.cov(p.T)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    major, minor = n_sigma * np.sqrt(evals[1]), n_sigma * np.sqrt(evals[0])
    angle = float(np.arctan2(evecs[1, 1], evecs[0, 1]))
    return center, (float(major), float(minor)), angle, float(np.pi * major * minor)


def diversity_report(ckpt, labeled_sets):
    """Encode every mesh, embed jointly with PCA, summarize each label.

    ``labeled_sets`` maps label -> list of meshes (or vertex arrays), kept in
    insertion order. Returns ``(points_csv, ellipses_csv, areas)``.
    """
    labels = list(labeled_sets)
    if len(set(labels)) != len(labels):
        raise ContractViolation("duplicate label")
    codes, tags = [], []
    for label in labels:
        members = list(labeled_sets[label])
        if not members:
            raise ContractViolation(f"set {label!r} is empty")
        verts = np.stack([ckpt.check_mesh(m) for m in members])
        codes.append(encode(ckpt.params, ckpt.hierarchy, verts))
        tags += [label] * len(members)
    coords = pca_embed(np.concatenate(codes))
    tags = np.array(tags)

    pts = io.StringIO()
    w = csv.writer(pts, lineterminator="\n")
    w.writerow(["label", "pc1", "pc2"])
    for tag, (a, b) in zip(tags.tolist(), coords.tolist()):
        w.writerow([tag, repr(a), repr(b)])

    ell = io.StringIO()
    w = csv.writer(ell, lineterminator="\n")
    w.writerow(["label", "count", "center_x", "center_y", "major", "minor", "angle", "area"])
    areas = {}
    for label in labels:
        sel = coords[tags == label]
        center, (major, minor), angle, area = covariance_ellipse(sel)
        areas[label] = area
        w.writerow([label, len(sel), repr(float(center[0])), repr(float(center[1])),
                    repr(major), repr(minor), repr(angle), repr(area)])
    return pts.getvalue(), ell.getvalue(), areas


def part_synthesis(ckpt, sources, targets):
    """Every single-part swap: len(sources) x len(targets) x K meshes."""
    out = []
    for s in sources:
        for t in targets:
            for k in range(ckpt.params.n_parts):
                out.append(swap_parts(ckpt, s, t, [k]))
    return out


def fine_part_weights(hierarchy, weights):
    """Local weights carried to level 0 through the up-sampling matrices: (N0, K)."""
    W = weights.W if hasattr(weights, "W") else np.asarray(weights)
    return hierarchy.upsample_to_fine(W)


def locality_ratios(ckpt, pairs, reference_weights=None):
    """Per-part ratio of mean displacement in high- vs low-weight regions.

    For part k, the displacement of each fine vertex between the alpha=0 and
    alpha=1 interpolations is averaged over ``pairs`` of (source, target)
    meshes. Regions come from ``reference_weights`` (default: the
    checkpoint's own) carried to full resolution: the top decile of part-k
    weight versus the bottom half.
    """
    ref = ckpt.local_weights if reference_weights is None else reference_weights
    wf = fine_part_weights(ckpt.hierarchy, ref)
    ratios = []
    for k in range(ckpt.params.n_parts):
        disp = np.zeros(wf.shape[0])
        for src, tgt in pairs:
            a = interpolate_part(ckpt, src, tgt, k, 0.0).vertices
            b = interpolate_part(ckpt, src, tgt, k, 1.0).vertices
            disp += np.linalg.norm(b - a, axis=1)
        disp /= max(len(pairs), 1)
        top = wf[:, k] >= np.quantile(wf[:, k], 0.9)
        bottom = wf[:, k] <= np.quantile(wf[:, k], 0.5)
        low = disp[bottom].mean()
        ratios.append(float(disp[top].mean() / low) if low > 0 else float("inf"))
    return np.array(ratios)
