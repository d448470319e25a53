"""Time the split-scan kernels across backends and check they agree.

The tree learners spend most of their time scanning sorted feature
columns for the best split.  That scan ships in three interchangeable
implementations (numba, numpy, python); `CTIVALIDATOR_NUMBA=0` forces
the numpy fallback at import time.  This script times all available
backends on identical inputs and verifies bit-identical results, so the
fallback can be trusted whenever numba is absent.

Run:  python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000]
"""

import argparse
import time

import numpy as np

from ctivalidator.learners import _kernels


def time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def classification_inputs(n, rng):
    values = np.sort(rng.normal(size=n).round(3))
    codes = rng.integers(0, 4, size=n).astype(np.int64)
    return values, codes, 4, 1


def regression_inputs(n, rng):
    values = np.sort(rng.normal(size=n).round(3))
    grad = rng.normal(size=n)
    hess = np.abs(rng.normal(size=n)) + 0.5
    return values, grad, hess, 1.0, 1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1000,10000,100000",
                        help="comma list of column lengths to scan")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions (best of N)")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]

    impls = _kernels.implementations()
    print(f"selected backend: {_kernels.BACKEND} (numba available: "
          f"{_kernels.HAS_NUMBA})")
    print(f"{'kernel':<16}{'n':>9}" +
          "".join(f"{name:>12}" for name in impls) + "   agreement")

    rng = np.random.default_rng(12345)
    for kind, make_inputs in (("classification", classification_inputs),
                              ("regression", regression_inputs)):
        for n in sizes:
            inputs = make_inputs(n, rng)
            results = {}
            timings = {}
            for name, impl in impls.items():
                fn = impl[kind]
                fn(*inputs)  # warm-up (numba compiles on first call)
                timings[name] = time_call(fn, inputs, args.repeats)
                score, position = fn(*inputs)
                results[name] = (float(score), int(position))
            agree = len(set(results.values())) == 1
            row = f"{kind:<16}{n:>9}"
            for name in impls:
                row += f"{timings[name] * 1e3:>10.3f}ms"
            print(row + ("   identical" if agree else "   MISMATCH " +
                         repr(results)))
            if not agree:
                raise SystemExit(1)

    print("\nbackends returned identical (score, position) on every input.")


if __name__ == "__main__":
    main()
