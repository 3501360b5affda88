"""Benchmark the split-scoring kernel: compiled extension vs pure Python.

Simulates the tree learner's hot path: repeated gain scans over shrinking
row subsets of a large three-valued dataset.  Run from the repo root:

    python benchmarks/bench_split_scores.py [n_rows] [n_features]
"""

import sys
import time

import numpy as np

from rebac_miner import _split_scores_py

try:
    from rebac_miner import _split_scores as compiled
except ImportError:
    compiled = None


def node_workload(rng, n_rows, n_features):
    """Row subsets shaped like a recursive tree build: halving partitions."""
    subsets = []
    rows = np.arange(n_rows, dtype=np.int64)
    while len(rows) > 2:
        subsets.append(rows)
        rows = np.sort(rng.choice(rows, size=len(rows) // 2, replace=False))
    return subsets


def run(impl, cells, labels, subsets, cands):
    started = time.perf_counter()
    acc = 0.0
    for rows in subsets:
        acc += float(impl.split_gains(cells, labels, rows, cands).sum())
    return time.perf_counter() - started, acc


def main():
    n_rows = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
    n_features = int(sys.argv[2]) if len(sys.argv) > 2 else 64
    rng = np.random.default_rng(0)
    cells = rng.integers(0, 3, size=(n_rows, n_features), dtype=np.uint8)
    labels = rng.integers(0, 3, size=n_rows, dtype=np.uint8)
    cands = np.arange(n_features, dtype=np.int64)
    subsets = node_workload(rng, n_rows, n_features)
    total = sum(len(s) for s in subsets)
    print(f"{n_rows} rows x {n_features} features; "
          f"{len(subsets)} node scans over {total} row visits")

    py_time, py_acc = run(_split_scores_py, cells, labels, subsets, cands)
    print(f"pure python: {py_time:.3f}s")
    if compiled is None:
        print("compiled kernel not built; install with a C toolchain to compare")
        return
    cy_time, cy_acc = run(compiled, cells, labels, subsets, cands)
    assert abs(py_acc - cy_acc) < 1e-6, "kernels disagree"
    print(f"compiled:    {cy_time:.3f}s")
    print(f"speedup:     {py_time / cy_time:.1f}x")


if __name__ == "__main__":
    main()
