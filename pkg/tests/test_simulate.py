import math

import numpy as np
import pytest

from dirng.bell import CHSH, QuantumModel, behavior_from_model, bell_value
from dirng.curves import load_curve
from dirng.eat import ProtocolParams, bell_tolerance, switch_probability
from dirng.simulate import (estimate_abort_rate, run_protocol,
                            run_protocol_for_params)

ROOT8 = 2.0 * math.sqrt(2.0)
V_DESK = 2.65022 / ROOT8
MODEL = QuantumModel(V_DESK)


class TestRunProtocol:
    def test_honest_run_tracks_expected_value(self):
        n = 1_000_000
        delta = bell_tolerance(CHSH, 0.01, n, 0.9999)
        res = run_protocol(CHSH, MODEL, n=n, gamma=0.01,
                           threshold=2.65022 - delta, event_rate=70000.0,
                           switch_delay=0.0, seed=2024)
        assert abs(res.s_hat - 2.65022) <= 0.1
        assert not res.aborted
        assert not res.no_test_data

    def test_forced_gamma_zero(self):
        res = run_protocol(CHSH, MODEL, n=1000, gamma=0.0, threshold=2.0,
                           event_rate=1.0, switch_delay=0.0, seed=5)
        assert res.m_test == 0
        assert res.no_test_data
        assert res.aborted
        assert math.isnan(res.s_hat)
        assert res.raw_bitlen == 2 * 1000

    def test_noise_source_aborts(self):
        res = run_protocol(CHSH, QuantumModel(0.0), n=100_000, gamma=0.05,
                           threshold=0.5, event_rate=1.0, switch_delay=0.0,
                           seed=9)
        assert res.aborted

    def test_determinism(self):
        kwargs = dict(n=50_000, gamma=0.05, threshold=2.4, event_rate=70000.0,
                      switch_delay=0.001, seed=77, trial=3)
        a = run_protocol(CHSH, MODEL, **kwargs)
        b = run_protocol(CHSH, MODEL, **kwargs)
        assert np.array_equal(a.counts, b.counts)
        assert a.raw_bits == b.raw_bits
        assert a.s_hat == b.s_hat
        assert a.switches == b.switches

    def test_trials_differ(self):
        kwargs = dict(n=10_000, gamma=0.05, threshold=2.4, event_rate=1.0,
                      switch_delay=0.0, seed=77)
        a = run_protocol(CHSH, MODEL, trial=0, **kwargs)
        b = run_protocol(CHSH, MODEL, trial=1, **kwargs)
        assert a.raw_bits != b.raw_bits

    def test_structure_invariants(self):
        res = run_protocol(CHSH, MODEL, n=20_000, gamma=0.1, threshold=2.0,
                           event_rate=1000.0, switch_delay=0.0, seed=1)
        assert int(res.counts.sum()) == 20_000
        assert res.m_test <= 20_000
        assert res.raw_bitlen == 2 * (20_000 - res.m_test)
        assert int(res.test_counts.sum()) == res.m_test

    def test_estimator_unbiased(self):
        # mean of s_hat over 100 seeded runs within 3 sigma of the model value
        s = bell_value(CHSH, behavior_from_model(MODEL))
        n, gamma, runs = 100_000, 0.05, 100
        vals = []
        for t in range(runs):
            res = run_protocol(CHSH, MODEL, n=n, gamma=gamma, threshold=-10.0,
                               event_rate=1.0, switch_delay=0.0, seed=31, trial=t)
            vals.append(res.s_hat)
        mean = sum(vals) / runs
        var_score = 16.0 - s * s          # E[score^2] = 16 for CHSH
        sigma = math.sqrt(var_score / (n * gamma)) / math.sqrt(runs)
        assert abs(mean - s) <= 3 * sigma

    def test_counts_match_behavior(self):
        beh = behavior_from_model(MODEL)
        n = 1_000_000
        res = run_protocol(CHSH, MODEL, n=n, gamma=0.5, threshold=-10.0,
                           event_rate=1.0, switch_delay=0.0, seed=13)
        for x in (0, 1):
            for y in (0, 1):
                n_xy = res.counts[:, :, x, y].sum()
                for a in (0, 1):
                    for b in (0, 1):
                        p = beh.p[a, b, x, y]
                        observed = res.counts[a, b, x, y]
                        bound = 4.0 * math.sqrt(n_xy * p * (1 - p))
                        assert abs(observed - n_xy * p) <= bound

    def test_wall_time_model(self):
        n, gamma, tau, rate = 1_000_000, 0.1, 0.01, 70000.0
        res = run_protocol(CHSH, MODEL, n=n, gamma=gamma, threshold=-10.0,
                           event_rate=rate, switch_delay=tau, seed=4)
        per_round = res.modeled_wall_time / n
        closed = 1.0 / rate + tau * switch_probability(gamma)
        assert per_round == pytest.approx(closed, rel=0.01)


class TestSwitchRate:
    @pytest.mark.parametrize("gamma", [0.01, 0.1, 1.0])
    def test_matches_closed_form(self, gamma):
        n = 1_000_000
        res = run_protocol(CHSH, MODEL, n=n, gamma=gamma, threshold=-10.0,
                           event_rate=1.0, switch_delay=0.0, seed=101)
        p = switch_probability(gamma)
        sigma = math.sqrt(p * (1 - p) / (n - 1))
        assert abs(res.empirical_switch_rate() - p) <= 3 * sigma

    def test_constant_settings(self):
        res = run_protocol(CHSH, MODEL, n=10_000, gamma=0.0, threshold=0.0,
                           event_rate=1.0, switch_delay=0.0, seed=3)
        assert res.empirical_switch_rate() == 0.0


class TestAbortRate:
    def test_honest_abort_rate_small(self):
        n, gamma, p_pass = 100_000, 0.05, 0.99
        delta = bell_tolerance(CHSH, gamma, n, p_pass)
        frac = estimate_abort_rate(CHSH, MODEL, n=n, gamma=gamma,
                                   threshold=2.65022 - delta, trials=500, seed=8)
        assert frac <= 0.03

    def test_trivial_thresholds(self):
        assert estimate_abort_rate(CHSH, MODEL, n=1000, gamma=0.1,
                                   threshold=-math.inf, trials=20, seed=1) == 0.0
        assert estimate_abort_rate(CHSH, MODEL, n=1000, gamma=0.1,
                                   threshold=math.inf, trials=20, seed=1) == 1.0


class TestParamsDriver:
    def test_run_from_params(self):
        params = ProtocolParams(expression=CHSH, curve=load_curve("table2"),
                                expected_bell=2.65022, event_rate=70000.0,
                                rounds=100_000, gamma=0.05, p_pass=0.99)
        res = run_protocol_for_params(params, MODEL, seed=12)
        delta = bell_tolerance(CHSH, 0.05, 100_000, 0.99)
        assert res.threshold == pytest.approx(2.65022 - delta)
        assert res.n == 100_000
