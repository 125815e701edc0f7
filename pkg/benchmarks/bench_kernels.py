"""Benchmark the compiled kernels against their pure-numpy twins.

Each hot kernel in :mod:`pbinv.kernels` ships in two builds: a numba
``@njit`` version (used when numba imports and ``PBINV_NUMBA`` is not 0)
and a pure-numpy fallback with the ``_numpy`` suffix.  This script times
both builds on the same inputs and checks that they agree to floating
round-off, so a backend switch can never change results.

Run from the repository root::

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 128,512 --repeats 5

With ``PBINV_NUMBA=0`` the compiled alias *is* the numpy build; the
script then reports numpy timings only and skips the comparison.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from pbinv import kernels


def _best_of(fn, args, repeats):
    """Best wall time of ``repeats`` calls, in seconds."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _agreement(a, b):
    """Max elementwise |a - b| over one array or a tuple of arrays."""
    if isinstance(a, tuple):
        return max(_agreement(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _grad_case(rng, n):
    f = rng.standard_normal((n, n))
    args = (f, 1.0 / n, 1.0 / n, True, False)
    return args, args


def _bracket_case(rng, n):
    f = rng.standard_normal((n, n))
    g = rng.standard_normal((n, n))
    args = (f, g, 1.0 / n, 1.0 / n, True, True, 1.0)
    return args, args


def _interp_case(rng, n):
    nodes = rng.standard_normal((n, n))
    npts = 4 * n * n
    u = rng.uniform(-1.0, n + 1.0, npts)
    v = rng.uniform(-1.0, n + 1.0, npts)
    args = (nodes, u, v, True, False)
    return args, args


def _lse_case(rng, n):
    K = rng.standard_normal((n, n))
    args = (K, 300.0)
    return args, args


CASES = [
    ("grad_grid", kernels.grad_grid, kernels.grad_grid_numpy, _grad_case),
    ("bracket_grid", kernels.bracket_grid, kernels.bracket_grid_numpy, _bracket_case),
    ("interp_cubic", kernels.interp_cubic, kernels.interp_cubic_numpy, _interp_case),
    ("lse_abs", kernels.lse_abs, kernels.lse_abs_numpy, _lse_case),
]


def run(sizes, repeats, seed):
    rows = []
    for name, fast, slow, make in CASES:
        for n in sizes:
            rng = np.random.Generator(np.random.Philox(key=[seed, n]))
            fast_args, slow_args = make(rng, n)
            if kernels.HAS_NUMBA:
                fast(*fast_args)  # JIT warm-up outside the timed region
                t_fast = _best_of(fast, fast_args, repeats)
            else:
                t_fast = None
            t_slow = _best_of(slow, slow_args, repeats)
            diff = _agreement(fast(*fast_args), slow(*slow_args))
            rows.append(
                {
                    "kernel": name,
                    "n": n,
                    "numpy_ms": 1e3 * t_slow,
                    "numba_ms": None if t_fast is None else 1e3 * t_fast,
                    "speedup": None if t_fast is None else t_slow / t_fast,
                    "max_abs_diff": diff,
                }
            )
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256,512",
                    help="comma-separated grid sizes (default 64,128,256,512)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="timing repeats per case; best is reported")
    ap.add_argument("--seed", type=int, default=0, help="input-data seed")
    ap.add_argument("--json", metavar="PATH",
                    help="also write the rows as JSON to PATH")
    args = ap.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    backend = "numba" if kernels.HAS_NUMBA else "numpy"
    print(f"active backend: {backend} (threads cap: {kernels.set_threads()})")
    if not kernels.HAS_NUMBA:
        print("numba disabled or missing: timing the numpy build only")

    rows = run(sizes, args.repeats, args.seed)

    hdr = f"{'kernel':<14} {'n':>5} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max|diff|':>10}"
    print(hdr)
    print("-" * len(hdr))
    worst = 0.0
    for r in rows:
        numba_ms = "-" if r["numba_ms"] is None else f"{r['numba_ms']:.3f}"
        speedup = "-" if r["speedup"] is None else f"{r['speedup']:.1f}x"
        print(f"{r['kernel']:<14} {r['n']:>5} {r['numpy_ms']:>10.3f} "
              f"{numba_ms:>10} {speedup:>8} {r['max_abs_diff']:>10.2e}")
        worst = max(worst, r["max_abs_diff"])

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"backend": backend, "rows": rows}, fh, indent=2)
        print(f"wrote {args.json}")

    tol = 1e-9
    if worst > tol:
        print(f"FAIL: builds disagree by {worst:.2e} (> {tol:.0e})")
        return 1
    print(f"builds agree to {worst:.2e} (tolerance {tol:.0e})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
