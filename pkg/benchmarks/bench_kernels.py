"""Compare the numba and numpy kernel paths.

    python benchmarks/bench_kernels.py [--repeat 5] [--max-n 8]

The first numba call compiles (or loads the on-disk cache); that call is
timed separately and excluded from the steady-state numbers.
"""

import argparse
import time

import numpy as np

from bellvis import _kernels
from bellvis.inequalities import build_symmetrized_CH, term_table
from bellvis.states import random_pure_state


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_expectation(n, repeat):
    psi = random_pure_state(n, 0).amplitudes
    rng = np.random.default_rng(1)
    ops = [rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2)) for _ in range(n)]
    out = {}
    for backend in ("numpy", "numba"):
        _kernels.expectation_tensor(psi, ops, backend=backend)  # warm-up / compile
        out[backend] = _time(lambda be=backend: _kernels.expectation_tensor(psi, ops, backend=be), repeat)
    a = _kernels.expectation_tensor(psi, ops, backend="numpy")
    b = _kernels.expectation_tensor(psi, ops, backend="numba")
    return out, float(np.max(np.abs(a - b)))


def bench_scores(n, repeat):
    expr = build_symmetrized_CH(n)
    masks, values, coeffs = term_table(expr)
    count = expr.scenario.n_strategies
    out = {}
    for backend in ("numpy", "numba"):
        _kernels.strategy_scores(masks, values, coeffs, min(count, 1024), backend=backend)
        out[backend] = _time(
            lambda be=backend: _kernels.strategy_scores(masks, values, coeffs, count, backend=be), repeat
        )
    a = _kernels.strategy_scores(masks, values, coeffs, count, backend="numpy")
    b = _kernels.strategy_scores(masks, values, coeffs, count, backend="numba")
    return out, float(np.max(np.abs(a - b)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--max-n", type=int, default=8)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or BELLVIS_NO_NUMBA set); both columns use numpy")

    print(f"{'kernel':<22}{'n':>3}{'numpy [ms]':>13}{'numba [ms]':>13}{'speedup':>9}{'max |diff|':>12}")
    for n in range(3, args.max_n + 1):
        t, err = bench_expectation(n, args.repeat)
        print(
            f"{'expectation_tensor':<22}{n:>3}{1e3 * t['numpy']:>13.3f}{1e3 * t['numba']:>13.3f}"
            f"{t['numpy'] / t['numba']:>9.1f}{err:>12.1e}"
        )
    for n in range(3, min(args.max_n, 6) + 1):
        t, err = bench_scores(n, args.repeat)
        print(
            f"{'strategy_scores(symCH)':<22}{n:>3}{1e3 * t['numpy']:>13.3f}{1e3 * t['numba']:>13.3f}"
            f"{t['numpy'] / t['numba']:>9.1f}{err:>12.1e}"
        )


if __name__ == "__main__":
    main()
