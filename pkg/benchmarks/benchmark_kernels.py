#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure Python/numpy fallback.

Times the two hot per-step loops (exact OU transition, full-truncation
Heston Euler) on a study-sized workload and verifies along the way that
both backends produce bitwise-identical paths.

Run from the repo root after building the extension in place:

    python setup.py build_ext --inplace
    PYTHONPATH=src python benchmarks/benchmark_kernels.py
"""

import time

import numpy as np

from hybridcorr.backend import available_backends

N_STEPS = 10_000
N_PATHS = 200
SEED = 7


def bench(fn, reps):
    best = float("inf")
    out = None
    for _ in range(3):
        t0 = time.perf_counter()
        for k in range(reps):
            out = fn(k)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best, out


def main():
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(SEED)
    z = rng.standard_normal((N_PATHS, N_STEPS))
    dw = rng.standard_normal((N_PATHS, 2, N_STEPS)) * 2e-3
    base = np.zeros(N_STEPS)

    results = {}
    for name, mod in backends.items():
        t_ou, ou_last = bench(lambda k: mod.ou_exact_path(0.9996, 6.32e-4, z[k % N_PATHS]), N_PATHS)
        t_h, h_last = bench(
            lambda k: mod.heston_full_truncation(
                0.0, 0.1, 1 / 250, 1.0, 0.2, 0.3, base,
                dw[k % N_PATHS, 0], dw[k % N_PATHS, 1],
            ),
            N_PATHS,
        )
        results[name] = (t_ou, t_h, ou_last, h_last)

    print(f"workload: {N_PATHS} paths x {N_STEPS} steps, best of 3")
    print(f"{'backend':<10} {'ou_exact_path':>16} {'heston_euler':>16}")
    for name, (t_ou, t_h, _, _) in results.items():
        print(f"{name:<10} {t_ou * 1e3:>13.3f} ms {t_h * 1e3:>13.3f} ms")

    if len(results) == 2:
        c, p = results["compiled"], results["python"]
        assert np.array_equal(c[2], p[2]), "OU backends disagree"
        assert np.array_equal(c[3][0], p[3][0]), "Heston backends disagree (s)"
        assert np.array_equal(c[3][1], p[3][1]), "Heston backends disagree (v)"
        print(f"{'speedup':<10} {p[0] / c[0]:>14.1f}x {p[1] / c[1]:>14.1f}x")
        print("bitwise parity: OK")


if __name__ == "__main__":
    main()
