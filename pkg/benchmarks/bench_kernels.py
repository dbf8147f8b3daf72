"""Compare the numba kernels with their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--members 200000] [--repeat 5]

Both backends are timed in one process; the numba time excludes the first
(compiling) call.  Results must agree exactly for GF(256) evaluation and to
1e-10 relative for the binomial tail.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from czklab._accel import NUMBA_ENABLED
from czklab.kernels import binomial_outside_mass, poly_eval_gf256


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--members", type=int, default=200_000)
    ap.add_argument("--degree", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--m", type=int, default=50_000, help="binomial trials for the tail kernel")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    coeffs = rng.integers(0, 256, size=(args.members, args.degree), dtype=np.uint8)
    points = np.arange(16, dtype=np.uint8)
    m, rho = args.m, 0.1
    lo, hi = int(0.09 * m) + 1, int(0.11 * m) - 1

    cases = {
        "gf256-horner": lambda b: poly_eval_gf256(coeffs, points, b),
        "binomial-tail": lambda b: binomial_outside_mass(m, rho, lo, hi, b),
    }
    backends = ["numpy"] + (["numba"] if NUMBA_ENABLED else [])
    print(f"numba available: {NUMBA_ENABLED}")
    print(f"{'kernel':<16}{'backend':<8}{'seconds':>10}{'speedup':>9}")
    for name, fn in cases.items():
        ref = fn("numpy")
        base = None
        for b in backends:
            out = fn(b)  # warm-up, compiles under numba
            if name == "gf256-horner":
                assert np.array_equal(out, ref)
            else:
                assert abs(out - ref) <= 1e-10 * max(abs(ref), 1e-300)
            t = best_of(lambda: fn(b), args.repeat)
            base = base or t
            print(f"{name:<16}{b:<8}{t:>10.4f}{base / t:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
