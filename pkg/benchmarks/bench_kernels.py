"""Timing comparison of the JIT kernels against the pure-numpy fallback.

Runs each hot kernel on representative workloads under both backends and
prints a table.  Select the backend under test for library code elsewhere
with ``MAEE_BACKEND=numba|numpy``; here both implementations are imported
directly so one process covers the comparison.
"""

import time

import numpy as np

from maee.kernels import (BACKEND, dinkelbach_scan, dinkelbach_scan_numpy,
                          gain_profile, gain_profile_numpy)


def timeit(fn, *args, repeats=20):
    fn(*args)  # warm-up / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_gain_profile(rng, num_terms, num_points):
    mags = rng.uniform(0.1, 1.0, num_terms)
    phases = rng.uniform(-np.pi, np.pi, num_terms)
    freqs = rng.uniform(-1200.0, 1200.0, num_terms)
    xs = np.linspace(0.0, 0.01, num_points)
    args = (5.0, mags, phases, freqs, xs)
    fast = timeit(gain_profile, *args)
    ref = timeit(gain_profile_numpy, *args)
    np.testing.assert_allclose(gain_profile(*args), gain_profile_numpy(*args),
                               rtol=1e-12)
    return fast, ref


def bench_dinkelbach_scan(rng, num_centers):
    gains = rng.uniform(0.5, 4.0, num_centers) * 1e-8
    centers = np.linspace(0.0, 0.01, num_centers)
    t_comm = 2.0 - np.abs(centers - 0.005) / 0.1
    motor = 0.175 * np.abs(centers - 0.005)
    args = (gains, t_comm, motor, 0.5, 1e-10, 0.01, 0.8, 1e-9, 100)
    fast = timeit(dinkelbach_scan, *args)
    ref = timeit(dinkelbach_scan_numpy, *args)
    ee_f, p_f, _, feas_f = dinkelbach_scan(*args)
    ee_r, p_r, _, feas_r = dinkelbach_scan_numpy(*args)
    np.testing.assert_array_equal(feas_f, feas_r)
    np.testing.assert_allclose(ee_f[feas_f], ee_r[feas_r], rtol=1e-9)
    np.testing.assert_allclose(p_f[feas_f], p_r[feas_r], rtol=1e-9)
    return fast, ref


def main():
    rng = np.random.default_rng(7)
    print(f"active backend: {BACKEND}")
    print(f"{'kernel':<38} {'jit':>10} {'numpy':>10} {'speedup':>8}")
    for terms, points in ((45, 1_000), (45, 100_000), (190, 100_000)):
        fast, ref = bench_gain_profile(rng, terms, points)
        label = f"gain_profile {terms}x{points}"
        print(f"{label:<38} {fast*1e3:>8.2f}ms {ref*1e3:>8.2f}ms {ref/fast:>7.1f}x")
    for centers in (100, 10_000, 100_000):
        fast, ref = bench_dinkelbach_scan(rng, centers)
        label = f"dinkelbach_scan S={centers}"
        print(f"{label:<38} {fast*1e3:>8.2f}ms {ref*1e3:>8.2f}ms {ref/fast:>7.1f}x")


if __name__ == "__main__":
    main()
