"""Time the numba and pure-numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]

The first numba call of each kernel includes compilation (or cache load) and
is reported separately.
"""

import argparse
import time

import numpy as np

from ompc import _kernels as K


def cases(rng):
    s, m = 18, 8
    D = rng.uniform(0, 0.3, size=(s, m))
    cover = rng.uniform(0.1, 0.5, size=s)
    F = rng.uniform(0, 3, size=m)
    yield "subset_costs (2^18 subsets)", "subset_costs", (D, cover, F, float(np.log(1.5)), 1e-12)

    n, E = 12, 18
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    idx = rng.choice(len(pairs), size=E, replace=False)
    eu = np.array([pairs[i][0] for i in idx], dtype=np.int64)
    ev = np.array([pairs[i][1] for i in idx], dtype=np.int64)
    w = rng.integers(1, 10, size=E).astype(np.float64)
    bounds = np.full(n, 3, dtype=np.int64)
    yield "steiner_weights (2^18 edge sets)", "steiner_weights", (
        eu, ev, w, bounds, np.array([0, 1], dtype=np.int64), np.array([n - 1, n - 2], dtype=np.int64), n)

    P = rng.uniform(0, 1, size=(18, 6))
    C = rng.uniform(0, 1, size=(18, 4))
    yield "ompc_alpha (2^18 assignments)", "ompc_alpha", (P, C, 1e-12)

    rows = 100_000
    lengths = rng.integers(1, 6, size=rows)
    ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    cdf = np.empty(ptr[-1])
    for r in range(0, rows):
        lo, hi = ptr[r], ptr[r + 1]
        cdf[lo:hi] = np.arange(1, hi - lo + 1) / (hi - lo)
    draws = 1.0 - rng.random(rows)
    yield "sample_rows (1e5 rows)", "sample_rows", (ptr, cdf, draws)

    chosen = rng.integers(0, ptr[-1], size=rows).astype(np.int64)
    pair_len = rng.integers(1, 10, size=ptr[-1])
    pair_ptr = np.concatenate([[0], np.cumsum(pair_len)]).astype(np.int64)
    pair_edges = rng.integers(0, 1000, size=pair_ptr[-1]).astype(np.int64)
    yield "edge_loads (1e5 picks)", "edge_loads", (chosen, pair_ptr, pair_edges, 1000)


def timed(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':36s} {'numpy s':>10s} {'numba s':>10s} {'first numba s':>14s} {'speedup':>8s}")
    for label, name, a in cases(rng):
        nb = getattr(K, name + "_numba")
        t0 = time.perf_counter()
        nb(*a)
        first = time.perf_counter() - t0
        t_np = timed(getattr(K, name + "_numpy"), a, args.repeat)
        t_nb = timed(nb, a, args.repeat)
        print(f"{label:36s} {t_np:10.4f} {t_nb:10.4f} {first:14.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
