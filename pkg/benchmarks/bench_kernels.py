#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot kernels (logistic Newton ML and weighted least squares)
at several problem sizes, plus one full Monte Carlo replicate through the
estimator registry under each backend.  Run after installing the package:

    python benchmarks/bench_kernels.py [--repeats 30]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from drmean.kernels import _numba_impl, _numpy_impl, expit

RANK_TOL = 1e-12


def _make_problem(n, p, seed):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    alpha = rng.normal(scale=0.5, size=p)
    t = (rng.random(n) < expit(X @ alpha)).astype(np.float64)
    y = X @ rng.normal(size=p) + rng.standard_normal(n)
    w = 1.0 / np.clip(expit(X @ alpha), 0.05, 1.0)
    return np.ascontiguousarray(X), t, y, w


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats):
    start = np.zeros(0)
    print(f"{'kernel':22s} {'n':>6s} {'p':>3s} {'numpy':>12s} {'numba':>12s} {'speedup':>8s}")
    for n, p in ((200, 3), (1000, 5), (4000, 5), (20000, 8)):
        X, t, y, w = _make_problem(n, p, seed=n + p)
        z = np.zeros(p)
        args = (X, t, z, 1e-10, 100, 30, 1e4, RANK_TOL, 1e-6)
        _numba_impl.logistic_core(*args)  # compile outside the timer
        t_np = _time(lambda: _numpy_impl.logistic_core(*args), repeats)
        t_nb = _time(lambda: _numba_impl.logistic_core(*args), repeats)
        print(f"{'logistic_newton':22s} {n:6d} {p:3d} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms {t_np / t_nb:7.1f}x")

        _numba_impl.least_squares_core(X, y, w, RANK_TOL)
        t_np = _time(lambda: _numpy_impl.least_squares_core(X, y, w, RANK_TOL), repeats)
        t_nb = _time(lambda: _numba_impl.least_squares_core(X, y, w, RANK_TOL), repeats)
        print(f"{'weighted_least_squares':22s} {n:6d} {p:3d} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms {t_np / t_nb:7.1f}x")


_REPLICATE_SNIPPET = """
import time
import numpy as np
from drmean.simulation import DgpSpec, generate, analyst_bases
from drmean.recipes import EvalContext, evaluate, CORE_ESTIMATORS
from drmean import backend_name

spec = DgpSpec.default()
prop_spec, out_spec = analyst_bases(spec, "CC")

def replicate(r):
    d = generate(spec, 1000, (7, r))
    ctx = EvalContext(d, outcome_spec=out_spec, propensity_spec=prop_spec)
    return [evaluate(name, ctx).mu for name in CORE_ESTIMATORS]

replicate(0)  # warm up (JIT compile on the numba backend)
t0 = time.perf_counter()
R = 200
for r in range(R):
    replicate(r)
dt = time.perf_counter() - t0
print(f"  {backend_name():6s} backend: {dt / R * 1e3:8.3f} ms/replicate "
      f"(n=1000, 12 estimators with SEs)")
"""


def bench_replicate():
    print("\nfull Monte Carlo replicate (subprocess per backend):")
    sys.stdout.flush()
    for backend in ("numpy", "numba"):
        env = dict(os.environ, DRMEAN_BACKEND=backend)
        subprocess.run([sys.executable, "-c", _REPLICATE_SNIPPET], env=env, check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()
    bench_kernels(args.repeats)
    bench_replicate()


if __name__ == "__main__":
    main()
