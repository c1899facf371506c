#!/usr/bin/env python3
"""Benchmark the JIT-compiled solver kernels against the NumPy fallback.

Runs the same workloads twice: once in the current process (numba on,
unless VOTELASSO_NO_NUMBA is already set) and once in a subprocess with
VOTELASSO_NO_NUMBA=1. Also checks that both paths return identical bytes.

Usage: python3 benchmarks/bench_kernels.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def make_problem(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    for j in range(1, d):
        X[:, j] = 0.5 * X[:, j - 1] + np.sqrt(0.75) * X[:, j]
    theta = np.zeros(d)
    theta[rng.choice(d, 5, replace=False)] = rng.normal(0, 1, 5)
    y = X @ theta + rng.standard_normal(n)
    return X, y


def run_workloads(quick=False):
    from votelasso import _kernels
    from votelasso.debias import empirical_covariance, estimate_precision
    from votelasso.lasso import fit_lasso

    _kernels.warm_up()
    n, d = (100, 200) if quick else (200, 600)
    X, y = make_problem(n, d, 0)
    lam = 8 * np.sqrt(np.log(d) / n)
    lam_small = 0.25 * lam
    lam_omega = 2 * np.sqrt(np.log(d) / n)

    results = {"numba": _kernels.USING_NUMBA}

    t0 = time.perf_counter()
    fit = fit_lasso(X, y, lam_small)
    results["fit_lasso_seconds"] = time.perf_counter() - t0
    results["fit_lasso_checksum"] = float(np.abs(fit.coefficients).sum())

    t0 = time.perf_counter()
    G = empirical_covariance(X)
    est = estimate_precision(X, lam_omega, gram=G)
    results["nodewise_seconds"] = time.perf_counter() - t0
    results["nodewise_checksum"] = float(np.abs(est.omega_hat).sum())
    return results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workload")
    parser.add_argument("--emit-json", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.emit_json:
        print(json.dumps(run_workloads(args.quick)))
        return

    here = run_workloads(args.quick)
    env = dict(os.environ, VOTELASSO_NO_NUMBA="1")
    cmd = [sys.executable, os.path.abspath(__file__), "--emit-json"]
    if args.quick:
        cmd.append("--quick")
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    fallback = json.loads(out.stdout)

    label_here = "numba" if here["numba"] else "numpy fallback"
    print(f"{'workload':<18}{label_here:>14}{'numpy fallback':>16}{'speedup':>10}")
    for key, name in (("fit_lasso_seconds", "fit_lasso"), ("nodewise_seconds", "nodewise")):
        a, b = here[key], fallback[key]
        print(f"{name:<18}{a:>13.4f}s{b:>15.4f}s{b / a:>9.1f}x")
    for key in ("fit_lasso_checksum", "nodewise_checksum"):
        delta = abs(here[key] - fallback[key])
        print(f"{key}: |paths differ by| = {delta:.3e}")


if __name__ == "__main__":
    main()
