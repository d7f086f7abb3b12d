"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size N] [--oracle-samples M] [--repeat R]

Reports the best wall time over R repeats for the vectorized prox kernels and
for the brute-force oracle scan, and checks the two backends agree.
"""

import argparse
import time

import numpy as np

from proxgen import _kernels_py
from proxgen._backend import compiled

KERNELS = [("l1", "prox_sparse", 3), ("l0", "prox_sparse", 0), ("l1/2", "prox_sparse", 1),
           ("l2/3", "prox_sparse", 2), ("quant l1/2", "prox_quant", 1), ("quant l1", "prox_quant", 3)]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--oracle-samples", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return

    gen = np.random.default_rng(0)
    z = gen.uniform(-5, 5, args.size)
    kappa = gen.uniform(0.1, 2.0, args.size)
    print(f"{'kernel':<14}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}  agree")
    for label, name, code in KERNELS:
        tp, a = best_of(lambda: getattr(_kernels_py, name)(z, kappa, 1e-2, 1.0, code), args.repeat)
        tc, b = best_of(lambda: getattr(compiled, name)(z, kappa, 1e-2, 1.0, code), args.repeat)
        agree = np.allclose(a, b, rtol=1e-12, atol=1e-14)
        print(f"{label:<14}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}  {agree}")

    zs = gen.uniform(-5, 5, args.oracle_samples)
    le = np.exp(gen.uniform(np.log(1e-3), np.log(5.0), args.oracle_samples))
    tp, a = best_of(lambda: _kernels_py.oracle_min(zs, le, 5), 1)
    tc, b = best_of(lambda: compiled.oracle_min(zs, le, 5), args.repeat)
    agree = np.allclose(a, b, atol=1e-9)
    print(f"{'oracle (q=1/2)':<14}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
