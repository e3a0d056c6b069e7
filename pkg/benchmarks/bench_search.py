"""Compare the compiled scoring kernels against the numpy fallback.

Times cosine_scores + topk per query over a random corpus and reports the
median per-query latency for each backend. Run from the repo root:

    python3 benchmarks/bench_search.py --n 100000 --d 256 --k 100
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from mixsearch import _kernels as numpy_kernels

try:
    from mixsearch import _ckernels as cython_kernels
except ImportError:
    cython_kernels = None


def bench(kernels, matrix, norms, queries, k, repeats):
    tie_rank = np.arange(matrix.shape[0], dtype=np.int64)
    # warmup
    scores = kernels.cosine_scores(matrix, norms, queries[0])
    kernels.topk(np.asarray(scores), tie_rank, k)

    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for q in queries:
            scores = kernels.cosine_scores(matrix, norms, q)
            kernels.topk(np.asarray(scores), tie_rank, k)
        samples.append((time.perf_counter() - t0) / len(queries))
    return statistics.median(samples)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50000, help="corpus size")
    ap.add_argument("--d", type=int, default=128, help="embedding dimension")
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    matrix = np.ascontiguousarray(rng.standard_normal((args.n, args.d)))
    norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
    queries = [np.ascontiguousarray(rng.standard_normal(args.d)) for _ in range(args.queries)]

    print(f"corpus n={args.n} d={args.d}, top-{args.k}, "
          f"{args.queries} queries x {args.repeats} repeats (median)\n")
    print(f"{'backend':<10} {'per query':>12} {'queries/s':>12}")

    results = {}
    for kernels in filter(None, (numpy_kernels, cython_kernels)):
        per_query = bench(kernels, matrix, norms, queries, args.k, args.repeats)
        results[kernels.BACKEND] = per_query
        print(f"{kernels.BACKEND:<10} {per_query * 1e3:>9.3f} ms {1.0 / per_query:>11.0f}")

    if cython_kernels is None:
        print("\ncompiled extension not built; numpy fallback only")
    elif "cython" in results and "numpy" in results:
        ratio = results["numpy"] / results["cython"]
        print(f"\ncython is {ratio:.2f}x the numpy throughput on this shape")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
