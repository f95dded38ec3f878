#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Times the three hot kernels at training-shaped sizes and prints a table.
Run after `pip install -e . --no-build-isolation` (which builds the
extension); the numpy fallback is always available.

    python benchmarks/bench_kernels.py            # default sizes
    python benchmarks/bench_kernels.py --preset snn --repeats 20
"""

import argparse
import time

import numpy as np

from spatialnn.kernels import _pykernels

try:
    from spatialnn.kernels import _ckernels
except ImportError:
    _ckernels = None

PRESETS = {
    # (n_a, n_b, d_free) geometry block; (T, batch, n) LIF population
    "small": dict(geo=(784, 256, 2), lif=(25, 100, 256)),
    "paper": dict(geo=(784, 2048, 2), lif=(25, 600, 2048)),
    "snn": dict(geo=(784, 2048, 2), lif=(25, 600, 2048)),
    "highdim": dict(geo=(784, 2048, 31), lif=(25, 600, 2048)),
}


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(preset, repeats, dtype):
    rng = np.random.default_rng(0)
    na, nb, k = preset["geo"]
    steps, batch, n = preset["lif"]
    a = rng.uniform(0, 1, (na, k)).astype(dtype)
    b = rng.uniform(0, 1, (nb, k)).astype(dtype)
    za = np.zeros(na, dtype=dtype)
    zb = np.ones(nb, dtype=dtype)
    dw = rng.normal(size=(na, nb)).astype(dtype)
    cur = rng.normal(size=(steps, batch, n)).astype(dtype)
    dspk = rng.normal(size=(steps, batch, n)).astype(dtype)
    dmem = np.zeros_like(dspk)

    backends = [("numpy", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))

    rows = []
    for label, mod in backends:
        dist = mod.pairwise_distances(a, b, za, zb, 1e-4)
        mem, _ = mod.lif_sequence(cur, steps, 0.95, 1.0)
        rows.append((label, [
            ("pairwise_distances", timeit(lambda: mod.pairwise_distances(a, b, za, zb, 1e-4), repeats)),
            ("weight_input_grads", timeit(lambda: mod.weight_input_grads(a, b, za, zb, dist, dw, 1e-4), repeats)),
            ("lif_sequence", timeit(lambda: mod.lif_sequence(cur, steps, 0.95, 1.0), repeats)),
            ("lif_backward", timeit(lambda: mod.lif_backward(dspk, dmem, mem, 0.95, 1.0, 2.0), repeats)),
        ]))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", choices=sorted(PRESETS), default="paper")
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    args = ap.parse_args()

    rows = bench(PRESETS[args.preset], args.repeats, np.dtype(args.dtype))
    print("preset=%s dtype=%s (best of %d)" % (args.preset, args.dtype, args.repeats))
    baseline = dict(rows[0][1])
    for label, results in rows:
        for kernel, secs in results:
            speedup = baseline[kernel] / secs if secs > 0 else float("inf")
            print("  %-7s %-20s %8.2f ms   x%.2f vs numpy" % (label, kernel, secs * 1e3, speedup))
    if _ckernels is None:
        print("compiled backend not built; showing numpy only")


if __name__ == "__main__":
    main()
