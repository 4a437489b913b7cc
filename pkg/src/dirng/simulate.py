"""Monte-Carlo run of the spot-checking round loop.

Each round is a test round with probability gamma (settings drawn
uniformly over all four pairs) and a generation round otherwise (fixed
settings).  Outcomes are sampled from the model behavior; the Bell value
is estimated from test rounds with the unbiased per-round score
4*c_xy*(-1)^(a xor b); the run aborts when the estimate falls below the
tolerated threshold.

Sampling runs through the kernel backend (compiled or numpy, identical
streams); the Bell estimate and all bookkeeping are derived from integer
counts so results are reproducible bit for bit across backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bell import Behavior, BellExpression, QuantumModel, behavior_from_model
from .eat import bell_tolerance
from .rng import trial_base


@dataclass(frozen=True)
class SimulationResult:
    counts: np.ndarray          # [a, b, x, y] over all rounds
    test_counts: np.ndarray     # [a, b, x, y] over test rounds only
    m_test: int
    s_hat: float                # nan when no test data
    threshold: float
    aborted: bool
    no_test_data: bool
    switches: int
    raw_bits: bytes             # generation-round (a, b) pairs, MSB-first
    raw_bitlen: int
    modeled_wall_time: float
    n: int
    seed: int
    trial: int

    def empirical_switch_rate(self) -> float:
        if self.n < 2:
            raise ValueError("switch rate needs at least two rounds")
        return self.switches / (self.n - 1)


def outcome_thresholds(beh: Behavior) -> np.ndarray:
    """Cumulative sampling thresholds per settings pair (4x3, float64).

    Row s = 2x+y holds the partial sums over outcomes ordered
    (a,b) = 00, 01, 10; both kernel backends compare against these exact
    doubles.
    """
    t = np.empty((4, 3), dtype=np.float64)
    for s in range(4):
        x, y = s >> 1, s & 1
        p00 = beh.p[0, 0, x, y]
        p01 = beh.p[0, 1, x, y]
        p10 = beh.p[1, 0, x, y]
        t[s, 0] = p00
        t[s, 1] = p00 + p01
        t[s, 2] = p00 + p01 + p10
    return t


def _counts_to_abxy(flat: np.ndarray) -> np.ndarray:
    # kernel index is settings*4 + outcome with settings = 2x+y, outcome = 2a+b
    return flat.reshape(2, 2, 2, 2).transpose(2, 3, 0, 1).copy()


def estimate_bell(expr: BellExpression, test_counts: np.ndarray, m_test: int) -> float:
    """Mean of the unbiased per-test-round score, computed from counts."""
    if m_test < 1:
        return math.nan
    total = 0.0
    for x in (0, 1):
        for y in (0, 1):
            same = int(test_counts[0, 0, x, y]) + int(test_counts[1, 1, x, y])
            diff = int(test_counts[0, 1, x, y]) + int(test_counts[1, 0, x, y])
            total += float(expr.c[x, y]) * (same - diff)
    return 4.0 * total / m_test


def run_protocol(expr: BellExpression, model: QuantumModel, n: int, gamma: float,
                 threshold: float, event_rate: float, switch_delay: float,
                 gen_settings: tuple[int, int] = (0, 0), seed: int = 0,
                 trial: int = 0) -> SimulationResult:
    """One seeded protocol run of n rounds.

    gamma may be 0 or 1 here (forced all-generation / all-test runs); a
    run without any test round aborts with the distinguished
    ``no_test_data`` flag.
    """
    if n < 1:
        raise ValueError("need at least one round")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    beh = behavior_from_model(model)
    thresholds = outcome_thresholds(beh)
    gen_setting = (gen_settings[0] << 1) | gen_settings[1]
    base = trial_base(seed, trial)
    counts_all, counts_test, switches, raw, raw_bitlen = _kernels.simulate_rounds(
        base, n, gamma, thresholds, gen_setting)
    counts = _counts_to_abxy(counts_all)
    test_counts = _counts_to_abxy(counts_test)
    m_test = int(counts_test.sum())
    s_hat = estimate_bell(expr, test_counts, m_test)
    no_test_data = m_test == 0
    aborted = bool(no_test_data or s_hat < threshold)
    wall = n / event_rate + switches * switch_delay
    return SimulationResult(counts=counts, test_counts=test_counts, m_test=m_test,
                            s_hat=s_hat, threshold=threshold, aborted=aborted,
                            no_test_data=no_test_data, switches=switches,
                            raw_bits=raw, raw_bitlen=raw_bitlen,
                            modeled_wall_time=wall, n=n, seed=seed, trial=trial)


def run_protocol_for_params(params, model: QuantumModel, seed: int = 0,
                            trial: int = 0) -> SimulationResult:
    """Run with n, threshold and timing derived from a parameter vector."""
    if params.gamma is None:
        raise ValueError("simulation needs a concrete gamma")
    n = params.n_rounds()
    delta = bell_tolerance(params.expression, params.gamma, n, params.p_pass)
    threshold = params.expected_bell - delta
    return run_protocol(params.expression, model, n, params.gamma, threshold,
                        params.event_rate, params.switch_delay,
                        params.gen_settings, seed, trial)


def estimate_abort_rate(expr: BellExpression, model: QuantumModel, n: int,
                        gamma: float, threshold: float, trials: int,
                        seed: int = 0) -> float:
    """Fraction of aborted runs over independent per-trial substreams."""
    if trials < 1:
        raise ValueError("need at least one trial")
    aborted = 0
    for t in range(trials):
        res = run_protocol(expr, model, n, gamma, threshold,
                           event_rate=1.0, switch_delay=0.0, seed=seed, trial=t)
        aborted += res.aborted
    return aborted / trials
