"""Command-line entry point: ``partmesh <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import checkpoint
from .config import RunConfig
from .data import face_template, load_dataset, load_mesh_dir, save_dataset, synth_faces
from .errors import (CheckpointError, ContractViolation, NumericOverflowError, ParseError,
                     TrainingDiverged)
from .mesh import read_obj, save_obj, vertex_distance_field, write_ply_colored
from .model import interpolate_part, prepare, reconstruct, swap_parts, train
from .nmf import compute_local_weights, weights_to_csv
from .report import diversity_report, fine_part_weights, part_synthesis
from .sampling import build_hierarchy

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("partmesh")


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    kwargs = {} if isinstance(data, bytes) else {"encoding": "utf-8", "newline": ""}
    with open(path, mode, **kwargs) as fh:
        fh.write(data)


def cmd_make_template(args):
    save_obj(args.out, face_template(args.rows, args.cols))
    print(f"wrote template with {args.rows * args.cols} vertices to {args.out}")


def cmd_synth_data(args):
    template = read_obj(args.template) if args.template else face_template()
    ds = synth_faces(args.n, template, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {args.n} meshes ({len(ds.train)} train / {len(ds.test)} test) to {args.out}")


def cmd_nmf_weights(args):
    template = read_obj(args.template)
    cfg = RunConfig()
    hierarchy = build_hierarchy(template, args.levels or cfg.levels, args.factor or cfg.factor)
    weights = compute_local_weights(hierarchy.meshes[-1].vertices, args.parts, args.sparsity,
                                    args.restarts, args.iters, args.seed)
    _write(args.out, weights_to_csv(weights))
    if args.ply_dir:
        os.makedirs(args.ply_dir, exist_ok=True)
        fine = fine_part_weights(hierarchy, weights)
        for k in range(weights.n_parts):
            _write(os.path.join(args.ply_dir, f"part_{k}.ply"),
                   write_ply_colored(template, fine[:, k]))
    print(f"local weights {weights.W.shape} (seed {weights.seed}, "
          f"objective {weights.objective:.6g}) -> {args.out}")


def cmd_train(args):
    base = RunConfig.desk() if args.desk else RunConfig()
    cfg = RunConfig.load(args.config, base) if args.config else base
    changes = {}
    if args.no_local_weights:
        changes["no_local_weights"] = True
    if args.no_projection:
        changes["no_projection"] = True
    if args.epochs:
        changes["epochs"] = args.epochs
    seed = cfg.seed if args.seed is None else args.seed
    cfg = cfg.replace(seed=seed, **changes)
    ds = load_dataset(args.data)
    hierarchy, weights = prepare(ds.template, cfg, seed)

    def progress(epoch, ckpt):
        log.info("epoch %d/%d  l1 %.6g  cycle %.6g", epoch, cfg.epochs,
                 ckpt.metrics["l1"][-1], ckpt.metrics["cycle"][-1])

    try:
        ckpt = train(ds.train_samples, cfg, seed, hierarchy=hierarchy, weights=weights,
                     callback=progress)
    except TrainingDiverged as exc:
        if exc.checkpoint is not None:
            checkpoint.save(args.out, exc.checkpoint)
            print(f"saved last good checkpoint (epoch {exc.epoch - 1}) to {args.out}",
                  file=sys.stderr)
        raise
    checkpoint.save(args.out, ckpt)
    l1 = ckpt.metrics["l1"]
    print(f"trained {cfg.epochs} epochs: l1 {l1[0]:.6g} -> {l1[-1]:.6g}; saved {args.out}")


def cmd_reconstruct(args):
    ckpt = checkpoint.load(args.ckpt)
    out = reconstruct(ckpt, read_obj(getattr(args, "in")))
    save_obj(args.out, out)


def cmd_interpolate(args):
    ckpt = checkpoint.load(args.ckpt)
    source, target = read_obj(args.source), read_obj(args.target)
    os.makedirs(args.out, exist_ok=True)
    meshes = []
    for i in range(1, args.steps + 1):
        alpha = i / (args.steps + 1)
        mesh = interpolate_part(ckpt, source, target, args.part, alpha)
        save_obj(os.path.join(args.out, f"part{args.part}_step{i}.obj"), mesh)
        meshes.append(mesh)
    field = vertex_distance_field(meshes[0], meshes[-1])
    _write(os.path.join(args.out, f"part{args.part}_distance.ply"),
           write_ply_colored(meshes[0], field.per_vertex))
    print(f"hausdorff(first, last) = {field.hausdorff!r}")


def cmd_swap(args):
    ckpt = checkpoint.load(args.ckpt)
    parts = [int(p) for p in args.parts.replace(",", " ").split()]
    save_obj(args.out, swap_parts(ckpt, read_obj(args.source), read_obj(args.target), parts))


def cmd_hausdorff(args):
    a, b = read_obj(args.a), read_obj(args.b)
    field = vertex_distance_field(a, b)
    if args.out:
        _write(args.out, write_ply_colored(a, field.per_vertex))
    print(repr(field.hausdorff))


def _mesh_set(path, which):
    if os.path.exists(os.path.join(path, "split.csv")):
        ds = load_dataset(path)
        idx = {"train": ds.train, "test": ds.test}.get(which, np.arange(len(ds.samples)))
        return [ds.mesh(i) for i in idx]
    meshes, names = load_mesh_dir(path)
    return [m for m, n in zip(meshes, names) if n != "template.obj"]


def cmd_embed_viz(args):
    ckpt = checkpoint.load(args.ckpt)
    train_set = _mesh_set(args.train, "train")[: args.limit]
    test_set = _mesh_set(args.test, "test")[: args.limit]
    if args.synth:
        synth = _mesh_set(args.synth, "all")[: args.limit]
    else:
        synth = part_synthesis(ckpt, train_set[: args.sources], test_set[: args.targets])
    pts, ellipses, areas = diversity_report(ckpt, {"train": train_set, "test": test_set,
                                                   "synth": synth})
    _write(args.out, pts)
    root, _ = os.path.splitext(args.out)
    _write(root + "_ellipses.csv", ellipses)
    for label, area in areas.items():
        print(f"{label}: ellipse area {area:.6g}")


def build_parser():
    p = argparse.ArgumentParser(prog="partmesh", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-template", help="write the built-in face template")
    s.add_argument("--out", required=True)
    s.add_argument("--rows", type=int, default=40)
    s.add_argument("--cols", type=int, default=32)
    s.set_defaults(func=cmd_make_template)

    s = sub.add_parser("synth-data", help="generate a synthetic registered dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--template", help="template OBJ (default: built-in face)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("nmf-weights", help="compute local weights for a template")
    s.add_argument("--template", required=True)
    s.add_argument("--parts", type=int, default=4)
    s.add_argument("--sparsity", type=float, default=7.5)
    s.add_argument("--restarts", type=int, default=5)
    s.add_argument("--iters", type=int, default=2000)
    s.add_argument("--levels", type=int)
    s.add_argument("--factor", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--ply-dir")
    s.set_defaults(func=cmd_nmf_weights)

    s = sub.add_parser("train", help="train the autoencoder")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--desk", action="store_true", help="start from desk-scale defaults")
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--no-local-weights", action="store_true")
    s.add_argument("--no-projection", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("reconstruct", help="encode and decode one mesh")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("interpolate", help="blend one part from source toward target")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--part", type=int, required=True)
    s.add_argument("--steps", type=int, default=8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_interpolate)

    s = sub.add_parser("swap", help="take a subset of parts from the target")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--parts", required=True, help="comma-separated part indices")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_swap)

    s = sub.add_parser("hausdorff", help="correspondence distance between two meshes")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_hausdorff)

    s = sub.add_parser("embed-viz", help="PCA diversity report")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--synth", help="directory of synthesized meshes (default: part swaps)")
    s.add_argument("--sources", type=int, default=5)
    s.add_argument("--targets", type=int, default=11)
    s.add_argument("--limit", type=int, default=220, help="max meshes per set")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_embed_viz)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "steps", 1) < 1 or getattr(args, "n", 2) < 2:
        parser.error("--steps must be >= 1 and --n >= 2")
    try:
        args.func(args)
    except (NumericOverflowError, TrainingDiverged, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ContractViolation, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
