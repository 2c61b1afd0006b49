#!/usr/bin/env python3
"""Compare the compiled and pure-Python log-joint kernels.

The backend is chosen at import time, so this script re-executes itself in a
subprocess with SOMGMM_BACKEND=python to time the fallback, then prints both
timings and the speedup.

Usage: python scripts/benchmark_backends.py [--samples N] [--components K]
       [--dim D] [--repeats R]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def measure(n, k, d, repeats):
    from somgmm import backend

    rng = np.random.default_rng(0)
    weights = np.full(k, 1.0 / k)
    centroids = rng.normal(size=(k, d))
    droots = rng.uniform(0.5, 2.0, (k, d))
    samples = rng.normal(size=(n, d))

    backend.log_joints(weights, centroids, droots, samples)  # warm up
    best = min(
        _timed(backend.log_joints, weights, centroids, droots, samples)
        for _ in range(repeats)
    )
    return {"backend": backend.BACKEND, "seconds": best}


def _timed(fn, *args):
    start = time.perf_counter()
    fn(*args)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=60000)
    parser.add_argument("--components", type=int, default=25)
    parser.add_argument("--dim", type=int, default=784)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--emit-json", action="store_true",
                        help="print a single JSON result (internal)")
    args = parser.parse_args()

    result = measure(args.samples, args.components, args.dim, args.repeats)
    if args.emit_json:
        print(json.dumps(result))
        return

    if result["backend"] != "cython":
        print("warning: compiled backend unavailable; timing fallback only")
        print(f"python backend: {result['seconds']:.3f}s")
        return

    env = dict(os.environ, SOMGMM_BACKEND="python")
    out = subprocess.run(
        [sys.executable, __file__, "--emit-json",
         "--samples", str(args.samples), "--components", str(args.components),
         "--dim", str(args.dim), "--repeats", str(args.repeats)],
        env=env, capture_output=True, text=True, check=True,
    )
    fallback = json.loads(out.stdout)
    shape = f"N={args.samples} K={args.components} D={args.dim}"
    print(f"log_joints ({shape}), best of {args.repeats}:")
    print(f"  cython: {result['seconds']:.3f}s")
    print(f"  python: {fallback['seconds']:.3f}s")
    print(f"  speedup: {fallback['seconds'] / result['seconds']:.2f}x")


if __name__ == "__main__":
    main()
