"""Backend contract: the compiled and pure-Python kernels must agree bit
for bit, and the word stream must match the scalar reference."""

import numpy as np
import pytest

from dirng import _kernels
from dirng._kernels import get_backend
from dirng.bell import QuantumModel, behavior_from_model
from dirng.rng import GOLDEN, MASK64, mix64, trial_base, uniform01, word
from dirng.simulate import outcome_thresholds

needs_compiled = pytest.mark.skipif(not _kernels.HAVE_COMPILED,
                                    reason="compiled backend not built")


def test_word_stream_matches_reference():
    base = trial_base(987654321, 3)
    ref = [mix64((base + (k + 1) * GOLDEN) & MASK64) for k in range(16)]
    assert [word(base, k) for k in range(16)] == ref


def test_uniform01_range():
    for k in range(1000):
        u = uniform01(word(1, k))
        assert 0.0 <= u < 1.0


def test_trial_bases_distinct():
    bases = {trial_base(42, t) for t in range(1000)}
    assert len(bases) == 1000


@needs_compiled
class TestBackendEquivalence:
    def setup_method(self):
        self.py = get_backend("python")
        self.cc = get_backend("compiled")
        beh = behavior_from_model(QuantumModel(0.94))
        self.thresh = outcome_thresholds(beh)

    @pytest.mark.parametrize("n,gamma,gen_setting", [
        (1, 0.5, 0),
        (7, 0.01, 3),
        (1000, 0.05, 0),
        (100_000, 0.01, 1),
        (65_537, 1.0, 2),
        (4096, 0.0, 0),
    ])
    def test_simulate_rounds_identical(self, n, gamma, gen_setting):
        base = trial_base(20240101, 0)
        r_py = self.py.simulate_rounds(base, n, gamma, self.thresh, gen_setting)
        r_cc = self.cc.simulate_rounds(base, n, gamma, self.thresh, gen_setting)
        assert np.array_equal(r_py[0], r_cc[0])
        assert np.array_equal(r_py[1], r_cc[1])
        assert r_py[2] == r_cc[2]
        assert r_py[3] == r_cc[3]
        assert r_py[4] == r_cc[4]

    def test_simulate_rounds_chunk_boundaries(self):
        # python backend slices internally; straddle its chunk size
        from dirng._kernels._backend_py import _CHUNK_ROUNDS
        n = _CHUNK_ROUNDS + 17
        base = trial_base(7, 1)
        r_py = self.py.simulate_rounds(base, n, 0.03, self.thresh, 0)
        r_cc = self.cc.simulate_rounds(base, n, 0.03, self.thresh, 0)
        assert np.array_equal(r_py[0], r_cc[0])
        assert r_py[2] == r_cc[2]
        assert r_py[3] == r_cc[3]

    @pytest.mark.parametrize("n_in,m_out", [
        (1, 1), (63, 1), (64, 64), (65, 127), (1000, 500), (2048, 512),
    ])
    def test_toeplitz_identical(self, n_in, m_out):
        rng = np.random.default_rng(n_in * 1000 + m_out)
        from dirng.extract import _pack_lsb
        seed_bits = rng.integers(0, 2, n_in + m_out - 1).astype(np.uint8)
        raw = rng.integers(0, 2, n_in).astype(np.uint8)
        sw = _pack_lsb(seed_bits)
        rw = _pack_lsb(raw[::-1])
        a = np.asarray(self.py.toeplitz_multiply(sw, rw, n_in, m_out))
        b = np.asarray(self.cc.toeplitz_multiply(sw, rw, n_in, m_out))
        assert np.array_equal(a, b)


class TestCounts:
    def test_counts_partition(self):
        beh = behavior_from_model(QuantumModel(0.9))
        thresh = outcome_thresholds(beh)
        counts_all, counts_test, switches, raw, bitlen = _kernels.simulate_rounds(
            trial_base(1, 0), 50_000, 0.1, thresh, 0)
        n = int(counts_all.sum())
        m = int(counts_test.sum())
        assert n == 50_000
        assert m <= n
        assert bitlen == 2 * (n - m)
        assert len(raw) == (bitlen + 7) // 8
        assert np.all(counts_test <= counts_all)
        assert 0 <= switches <= n - 1

    def test_gamma_zero_never_tests(self):
        beh = behavior_from_model(QuantumModel(0.9))
        thresh = outcome_thresholds(beh)
        counts_all, counts_test, switches, _, _ = _kernels.simulate_rounds(
            trial_base(1, 0), 10_000, 0.0, thresh, 2)
        assert counts_test.sum() == 0
        assert switches == 0
        # every round at the generation settings (index 2)
        assert counts_all.reshape(4, 4)[2].sum() == 10_000
