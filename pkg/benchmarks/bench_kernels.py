"""Time the compiled and pure-numpy flavours of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both flavours are imported side by side from ``cgunwarp.kernels``; the
``CGUNWARP_DISABLE_JIT`` switch only changes which one the package dispatches to.
"""

import argparse
import json
import time

import numpy as np

from cgunwarp import kernels as K


def _cases(rng):
    img = rng.random((712, 488, 3))
    ys, xs = np.mgrid[0:712, 0:488].astype(np.float64)
    xs = xs + rng.normal(0, 2, xs.shape)
    ys = ys + rng.normal(0, 2, ys.shape)

    mask = rng.random((1000, 720)) > 0.995
    blob = np.zeros((400, 300), dtype=bool)
    blob[50:350, 40:260] = True

    gy, gx = np.mgrid[0:45, 0:31].astype(np.float64)
    grid = np.stack([gx * 15.5 + 10, gy * 15.5 + 10], axis=-1)
    vals = rng.random((45, 31, 3))

    xp = np.ascontiguousarray(rng.random((8, 32, 180, 124)).astype(np.float32))
    cols = K.im2col_np(xp, 5, 5, 2, 1, 88, 60)

    a = rng.integers(0, 30, 400)
    b = rng.integers(0, 30, 380)

    d1 = rng.random((180, 140, 32))
    d2 = rng.random((180, 140, 32))
    fx = np.zeros((180, 140), dtype=np.int64)

    data = rng.random((220, 170, 25))
    off = np.arange(5) - 2
    ux = np.broadcast_to(np.tile(off, 5).astype(np.float64), (220, 170, 25)).copy()
    uy = np.broadcast_to(np.repeat(off, 5).astype(np.float64), (220, 170, 25)).copy()
    lab = np.argmin(data, axis=2)

    return {
        "bilinear_sample": ((img, xs, ys, True, 0.0), K.bilinear_sample_nb, K.bilinear_sample_np),
        "label_components": ((mask,), K.label_components_nb, K.label_components_np),
        "trace_boundary": ((blob, 40, 50, K._RING), K.trace_boundary_nb, K.trace_boundary_py),
        "rasterize_quads": ((grid, vals, 712, 488), K.rasterize_quads_nb, K.rasterize_quads_np),
        "im2col": ((xp, 5, 5, 2, 1, 88, 60), K.im2col_nb, K.im2col_np),
        "col2im": ((cols, xp.shape, 2, 1), K.col2im_nb, K.col2im_np),
        "edit_ops": ((a, b), K.edit_ops_nb, K.edit_ops_np),
        "match_costs": ((d1, d2, fx, fx, 2), K.match_costs_nb, K.match_costs_np),
        "icm_labels": ((data, ux, uy, lab, 0.05, 4.0, 4), K.icm_labels_nb, K.icm_labels_np),
    }


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def run(repeat=5, seed=0):
    rng = np.random.default_rng(seed)
    results = {}
    for name, (args, nb, np_) in _cases(rng).items():
        t0 = time.perf_counter()
        nb(*args)  # compile / warm cache
        compile_s = time.perf_counter() - t0
        t_nb = _time(nb, args, repeat)
        t_np = _time(np_, args, repeat)
        results[name] = {"numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb, "first_call_s": compile_s}
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba is not installed; both columns time the numpy path")
    res = run(args.repeat)
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, r in res.items():
        print(f"{name:<18}{r['numba_s'] * 1e3:>12.2f}{r['numpy_s'] * 1e3:>12.2f}{r['speedup']:>9.1f}x")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(res, f, indent=2)


if __name__ == "__main__":
    main()
