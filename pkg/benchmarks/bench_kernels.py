"""Compare the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
timed on a workload sized like its use inside the flow, and the two results
are compared so that a speedup never hides a disagreement.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from polyfloer.kernels import _fallback

try:
    from polyfloer.kernels import _core
except ImportError:  # extension not built
    _core = None


def workloads(rng: np.random.Generator):
    n = 64 * 64
    blocks = rng.standard_normal((n, 4, 4)) + 1j * rng.standard_normal((n, 4, 4))
    vecs = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))
    y = rng.uniform(-10.0, 10.0, size=64 * 64)
    r = 2.0 ** -0.25
    k = np.arange(257, dtype=float)
    limits = np.ceil((1.0 + 1.0 / r) * np.sqrt(1.0 + k * k)).astype(np.int64)
    return {
        "batched_matvec (4096 blocks of 4x4)": ("batched_matvec", (blocks, vecs)),
        "bump_profile (4096 points)": ("bump_profile", (y, math.pi / 4, 2 * math.pi)),
        "gap_sweep (k <= 256)": ("gap_sweep", (r, 256, limits)),
    }


def _agree(a, b) -> float:
    if isinstance(a, tuple):
        return max(_agree(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=20)
    args = parser.parse_args(argv)
    if _core is None:
        print("compiled core not built; only the fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38} {'fallback':>12} {'compiled':>12} {'speedup':>8} {'max diff':>10}")
    for label, (name, call_args) in workloads(rng).items():
        slow = getattr(_fallback, name)
        t_slow = min(timeit.repeat(lambda: slow(*call_args), repeat=args.repeat, number=args.number)) / args.number
        if _core is None:
            print(f"{label:<38} {t_slow * 1e3:>10.3f}ms {'-':>12} {'-':>8} {'-':>10}")
            continue
        fast = getattr(_core, name)
        t_fast = min(timeit.repeat(lambda: fast(*call_args), repeat=args.repeat, number=args.number)) / args.number
        diff = _agree(slow(*call_args), fast(*call_args))
        print(
            f"{label:<38} {t_slow * 1e3:>10.3f}ms {t_fast * 1e3:>10.3f}ms "
            f"{t_slow / t_fast:>7.1f}x {diff:>10.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
