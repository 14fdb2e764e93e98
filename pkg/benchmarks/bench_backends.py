#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_backends.py [n_points] [max_dim] [threads]

The pure-Python run uses a smaller instance scaled by --same flag absence;
both backends always produce identical barcodes, which is asserted here.
"""

import sys
import time

import numpy as np

from ripsph import ComputeParams, compute_persistence
from ripsph.backend import available_backends


def timed(data, backend, max_dim, threads):
    t0 = time.perf_counter()
    report = compute_persistence(
        data, ComputeParams(max_dim=max_dim, threads=threads, backend=backend)
    )
    return time.perf_counter() - t0, report.barcode


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 120
    max_dim = int(argv[2]) if len(argv) > 2 else 2
    threads = int(argv[3]) if len(argv) > 3 else 1
    rng = np.random.default_rng(1)
    cloud = rng.random((n, 3))
    from ripsph.engine import point_cloud_distances
    data = point_cloud_distances(cloud)

    print(f"{n} points, dim {max_dim}, threads {threads}")
    results = {}
    for backend in available_backends():
        best = None
        bc = None
        for _ in range(3):
            elapsed, bc = timed(data, backend, max_dim, threads)
            best = elapsed if best is None else min(best, elapsed)
        results[backend] = (best, bc)
        print(f"  {backend:<9} {best:8.3f} s")
    if len(results) == 2:
        t_c, bc_c = results["compiled"]
        t_p, bc_p = results["python"]
        assert bc_c == bc_p, "backends disagree"
        print(f"  speedup   {t_p / t_c:8.1f} x  (identical barcodes)")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
