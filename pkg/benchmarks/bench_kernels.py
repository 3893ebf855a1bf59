"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 128] [--repeat 5]

Reports the best-of-N wall time per kernel and backend, plus the largest
absolute difference between the two backends' outputs.
"""
import argparse
import timeit

import numpy as np

from hkface import kernels
from hkface.preprocess import gaussian_kernel
from hkface.synth import PhantomSpec, PoseSpec, make_phantom, mesh_triangles


def _cases(size):
    img, _ = make_phantom(PhantomSpec(size=size))
    depth, valid = img.depth, img.valid.copy()
    valid[::17, ::13] = False  # sprinkle holes so masking paths are exercised
    k = gaussian_kernel(1.0, 2)
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    pts = PoseSpec("Y", 30).apply(np.column_stack([cols.ravel(), rows.ravel(), depth.ravel()]),
                                  (size / 2, size / 2, float(depth.mean())))
    tris = mesh_triangles(valid, depth, 8.0)
    return {
        "smooth_masked": lambda impl: kernels.smooth_masked(depth, valid, k, impl=impl),
        "fit_field": lambda impl: kernels.fit_field(depth, valid, 2, impl=impl)[0],
        "rasterize": lambda impl: kernels.rasterize(pts[:, 0], pts[:, 1], pts[:, 2], tris,
                                                   size, size, impl=impl),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"grid {args.size}x{args.size}, best of {args.repeat}; backends: {', '.join(backends)}")
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max|diff|':>12}")
    for name, fn in _cases(args.size).items():
        times, outs = {}, {}
        for b, impl in backends.items():
            outs[b] = fn(impl)
            times[b] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        row = f"{name:<14}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if "cython" in backends:
            a, c = outs["python"], outs["cython"]
            both = np.isfinite(a) & np.isfinite(c)
            diff = float(np.max(np.abs(a[both] - c[both]))) if both.any() else 0.0
            row += f"{times['python'] / times['cython']:>9.1f}x{diff:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
