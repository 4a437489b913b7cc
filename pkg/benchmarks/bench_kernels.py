#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the two hot loops (protocol round simulation, packed Toeplitz
multiply) on representative desk-scale sizes with both backends and
prints a CSV table of timings plus the speedup.  Results are also a
correctness check: the backends must produce identical outputs.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import math
import sys
import time

import numpy as np

from dirng import _kernels
from dirng._kernels import get_backend
from dirng.bell import QuantumModel, behavior_from_model
from dirng.extract import _pack_lsb
from dirng.rng import trial_base
from dirng.simulate import outcome_thresholds

SIM_CASES = [(200_000, 0.05), (2_000_000, 0.01), (10_000_000, 0.01)]
TOEPLITZ_CASES = [(200_000, 20_000), (1_000_000, 100_000), (2_000_000, 200_000)]


def timed(fn, repeats):
    best = math.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_simulate(backend, n, gamma, thresholds, repeats):
    base = trial_base(2024, 0)
    return timed(lambda: backend.simulate_rounds(base, n, gamma, thresholds, 0),
                 repeats)


def bench_toeplitz(backend, seed_words, raw_words, n_in, m_out, repeats):
    return timed(lambda: backend.toeplitz_multiply(seed_words, raw_words,
                                                   n_in, m_out), repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not _kernels.HAVE_COMPILED:
        sys.stderr.write("compiled backend not built; nothing to compare\n")
        return 1
    py = get_backend("python")
    cc = get_backend("compiled")

    thresholds = outcome_thresholds(behavior_from_model(QuantumModel(0.937)))
    rng = np.random.default_rng(1)

    print("kernel,case,python_s,compiled_s,speedup,identical")
    for n, gamma in SIM_CASES:
        t_py, r_py = bench_simulate(py, n, gamma, thresholds, args.repeats)
        t_cc, r_cc = bench_simulate(cc, n, gamma, thresholds, args.repeats)
        same = (np.array_equal(r_py[0], r_cc[0]) and r_py[2] == r_cc[2]
                and r_py[3] == r_cc[3])
        print(f"simulate_rounds,n={n}/gamma={gamma},{t_py:.4f},{t_cc:.4f},"
              f"{t_py / t_cc:.1f},{same}")

    for n_in, m_out in TOEPLITZ_CASES:
        seed_bits = rng.integers(0, 2, n_in + m_out - 1).astype(np.uint8)
        raw = rng.integers(0, 2, n_in).astype(np.uint8)
        sw = _pack_lsb(seed_bits)
        rw = _pack_lsb(raw[::-1])
        t_py, r_py = bench_toeplitz(py, sw, rw, n_in, m_out, args.repeats)
        t_cc, r_cc = bench_toeplitz(cc, sw, rw, n_in, m_out, args.repeats)
        same = np.array_equal(np.asarray(r_py), np.asarray(r_cc))
        print(f"toeplitz_multiply,n_in={n_in}/m_out={m_out},{t_py:.4f},"
              f"{t_cc:.4f},{t_py / t_cc:.1f},{same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
