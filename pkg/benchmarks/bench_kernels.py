"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Workloads mirror training and hierarchy construction on the desk template:
a scaled-Laplacian product over a batch-32, 16-feature activation block, and the
closest-triangle search that builds the finest up-sampling matrix.
"""
import argparse
import timeit

import numpy as np

from partmesh import kernels
from partmesh.data import face_template
from partmesh.mesh import laplacian_bundle
from partmesh.sampling import decimate


def workloads():
    template = face_template()
    scaled = laplacian_bundle(template).scaled
    x = np.random.default_rng(0).normal(size=(template.n_vertices, 32 * 16))
    coarse, _, kept = decimate(template, 320)
    others = np.setdiff1d(np.arange(template.n_vertices), kept)
    pts = template.vertices[others]
    return {
        "csr_matmul 1280x1280 @ (1280, 512)": lambda impl: kernels.csr_matmul(
            scaled.indptr, scaled.indices, scaled.data, scaled.shape[0], x, impl=impl),
        f"closest_triangles {len(pts)} pts vs {len(coarse.faces)} faces": lambda impl:
            kernels.closest_triangles(pts, coarse.vertices, coarse.faces, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = sorted(kernels.IMPLEMENTATIONS)
    print(f"active backend: {kernels.BACKEND}; comparing {', '.join(impls)}")
    for name, fn in workloads().items():
        times = {}
        for impl in impls:
            fn(impl)  # warm-up
            number = 3
            times[impl] = min(timeit.repeat(lambda: fn(impl), number=number,
                                            repeat=args.repeat)) / number
        line = "  ".join(f"{impl} {1e3 * t:9.3f} ms" for impl, t in times.items())
        speedup = ""
        if "cython" in times:
            speedup = f"  speedup x{times['python'] / times['cython']:.1f}"
        print(f"{name:48s} {line}{speedup}")


if __name__ == "__main__":
    main()
