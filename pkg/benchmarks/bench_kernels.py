"""Time the compiled kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py --cases 5000 --m 20 --d 3

Both paths are called explicitly, so ``RANKCAL_NUMBA`` does not matter here.
Outputs are checked for exact equality before timing.
"""
import argparse
import timeit

import numpy as np

from rankcal._accel import HAVE_NUMBA
from rankcal.mst import mst_removal_lengths, pairwise_distances
from rankcal.prerank import prerank_multivariate, univariate_ranks


def kernels(S):
    return {
        "distances": lambda nb: pairwise_distances(S, nb),
        "mst_removals": lambda nb: mst_removal_lengths(S, nb),
        "dominance": lambda nb: prerank_multivariate(S, nb),
        "univariate_ranks": lambda nb: univariate_ranks(S, nb),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=5000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    S = np.random.default_rng(0).standard_normal((args.cases, args.m, args.d))
    print(f"cases={args.cases} m={args.m} d={args.d}")
    print(f"{'kernel':<18}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  identical")
    for name, fn in kernels(S).items():
        ok = same(fn(True), fn(False))  # also warms up the JIT
        t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=args.repeat))
        print(f"{name:<18}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x  {ok}")


if __name__ == "__main__":
    main()
