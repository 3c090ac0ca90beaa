"""Benchmark the disagreement kernels: numba loops vs numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--pool 2000] [--committee 50] [--repeats 5]

The workload mirrors one greedy step over a full pool, which is the hot loop
of every experiment.  Both paths are timed regardless of the RICHQUERY_NUMBA
flag; the flag only decides which one the package dispatches to at runtime.
"""

import argparse
import itertools
import time

import numpy as np

from richquery import kernels
from richquery.accel import NUMBA_ENABLED


def timeit(fn, repeats):
    fn()  # warm up (JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--pool", type=int, default=2000)
    parser.add_argument("--committee", type=int, default=50)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--mc-draws", type=int, default=300)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    N, P = args.committee, args.pool
    scores = rng.standard_normal((N, P)) * 1.5
    margins = rng.standard_normal((N, P))
    cand = np.arange(P, dtype=np.int64)
    base3 = np.array([11, 42, 77], dtype=np.int64)
    perms4 = np.array(list(itertools.permutations(range(4))), dtype=np.int64)
    m_mc = 7
    noise = rng.gumbel(0.0, 1.0, size=(N, args.mc_draws, m_mc))
    unif = rng.random(size=(N, args.mc_draws, m_mc))
    base6 = np.array([1, 2, 3, 5, 8, 13], dtype=np.int64)
    cand_mc = cand[:64]

    cases = [
        (
            "label (1 item x pool)",
            lambda: kernels._label_disagreement_loops(margins, cand),
            lambda: kernels.label_disagreement_numpy(margins, cand),
        ),
        (
            "selection (4 items x pool)",
            lambda: kernels._selection_disagreement_loops(scores, margins, base3, cand),
            lambda: kernels.selection_disagreement_numpy(scores, margins, base3, cand),
        ),
        (
            "ranking enumerated (4 items x pool)",
            lambda: kernels._rank_disagreement_enum_loops(scores, margins, base3, cand, perms4),
            lambda: kernels.rank_disagreement_enum_numpy(scores, margins, base3, cand, perms4),
        ),
        (
            f"ranking sampled (7 items x {len(cand_mc)} cands)",
            lambda: kernels._rank_disagreement_mc_loops(scores, margins, base6, cand_mc, noise, unif),
            lambda: kernels.rank_disagreement_mc_numpy(scores, margins, base6, cand_mc, noise, unif),
        ),
    ]

    print(f"pool={P} committee={N} repeats={args.repeats} numba_available={NUMBA_ENABLED}")
    print(f"{'kernel':42s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, loops, vectorized in cases:
        t_numpy = timeit(vectorized, args.repeats)
        if NUMBA_ENABLED:
            t_loops = timeit(loops, args.repeats)
            print(f"{name:42s} {t_loops * 1e3:9.2f}ms {t_numpy * 1e3:9.2f}ms {t_numpy / t_loops:7.1f}x")
        else:
            print(f"{name:42s} {'n/a':>10s} {t_numpy * 1e3:9.2f}ms {'':>8s}")


if __name__ == "__main__":
    main()
