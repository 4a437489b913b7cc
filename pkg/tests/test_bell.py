import json
import math

import numpy as np
import pytest

from dirng.bell import (BellError, CANONICAL_ANGLES, CHSH, Behavior,
                        QuantumModel, TargetUnreachableError, WEIGHTED,
                        behavior_from_model, bell_value, classical_bound,
                        correlator, deterministic_behavior,
                        expression_from_json, optimize_angles,
                        visibility_for_target)

ROOT2 = math.sqrt(2.0)


def brute_force_classical(c):
    """Test-local oracle: enumerate the 16 deterministic sign strategies."""
    best = -math.inf
    for a0 in (-1, 1):
        for a1 in (-1, 1):
            for b0 in (-1, 1):
                for b1 in (-1, 1):
                    a, b = (a0, a1), (b0, b1)
                    best = max(best, sum(c[x][y] * a[x] * b[y]
                                         for x in (0, 1) for y in (0, 1)))
    return best


class TestCorrelator:
    def test_perfectly_correlated_box(self):
        p = np.zeros((2, 2, 2, 2))
        p[0, 0] = 0.5
        p[1, 1] = 0.5
        box = Behavior(p)
        for x in (0, 1):
            for y in (0, 1):
                assert correlator(box, x, y) == 1.0

    def test_uniform_box(self):
        box = Behavior.uniform()
        assert correlator(box, 0, 0) == 0.0
        assert correlator(box, 1, 1) == 0.0

    def test_model_correlator_analytic(self):
        model = QuantumModel(1.0, (0.0, math.pi / 4, math.pi / 8, -math.pi / 8))
        beh = behavior_from_model(model)
        assert correlator(beh, 0, 0) == pytest.approx(math.cos(math.pi / 4), abs=1e-9)


class TestBellValue:
    def test_tsirelson_point(self):
        beh = behavior_from_model(QuantumModel(1.0))
        assert bell_value(CHSH, beh) == pytest.approx(2 * ROOT2, abs=1e-9)

    def test_uniform_box(self):
        assert bell_value(CHSH, Behavior.uniform()) == 0.0

    def test_table_operating_point(self):
        # visibility for the 70k events/s operating value, by linearity
        v = 2.65022 / (2 * ROOT2)
        beh = behavior_from_model(QuantumModel(v))
        assert bell_value(CHSH, beh) == pytest.approx(2.65022, abs=1e-5)


class TestClassicalBound:
    def test_chsh(self):
        assert classical_bound(CHSH) == pytest.approx(2.0, abs=1e-12)

    def test_weighted(self):
        assert classical_bound(WEIGHTED) == pytest.approx(5.0006, abs=5e-4)
        assert classical_bound(WEIGHTED) == pytest.approx(
            brute_force_classical(WEIGHTED.c), abs=1e-12)

    def test_single_coefficient(self):
        from dirng.bell import BellExpression
        expr = BellExpression("one", np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert classical_bound(expr) == 1.0

    def test_matches_max_over_deterministic_behaviors(self):
        # oracle equivalence: bound == max bell_value over the 16 boxes
        rng = np.random.default_rng(11)
        from dirng.bell import BellExpression
        for _ in range(50):
            expr = BellExpression("rnd", rng.normal(size=(2, 2)))
            best = max(bell_value(expr, deterministic_behavior(a0, a1, b0, b1))
                       for a0 in (0, 1) for a1 in (0, 1)
                       for b0 in (0, 1) for b1 in (0, 1))
            assert classical_bound(expr) == pytest.approx(best, abs=1e-9)


class TestBehaviorFromModel:
    def test_white_noise_is_uniform(self):
        beh = behavior_from_model(QuantumModel(0.0))
        assert np.allclose(beh.p, 0.25)

    def test_canonical_maximal_violation(self):
        beh = behavior_from_model(QuantumModel(1.0, CANONICAL_ANGLES))
        assert bell_value(CHSH, beh) == pytest.approx(2 * ROOT2, abs=1e-12)

    def test_half_visibility(self):
        beh = behavior_from_model(QuantumModel(0.5, CANONICAL_ANGLES))
        assert bell_value(CHSH, beh) == pytest.approx(ROOT2, abs=1e-9)

    def test_always_valid_behavior(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            model = QuantumModel(rng.uniform(), tuple(rng.uniform(-4, 4, 4)))
            beh = behavior_from_model(model)
            beh.validate()
            assert np.abs(beh.p.sum(axis=(0, 1)) - 1).max() < 1e-12
            assert beh.no_signaling_deviation() < 1e-12

    def test_linearity_in_visibility(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            angles = tuple(rng.uniform(-4, 4, 4))
            v = rng.uniform()
            expr = CHSH if rng.uniform() < 0.5 else WEIGHTED
            full = bell_value(expr, behavior_from_model(QuantumModel(1.0, angles)))
            part = bell_value(expr, behavior_from_model(QuantumModel(v, angles)))
            assert part == pytest.approx(v * full, abs=1e-9)

    def test_algebraic_bound(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            model = QuantumModel(rng.uniform(), tuple(rng.uniform(-4, 4, 4)))
            beh = behavior_from_model(model)
            for expr in (CHSH, WEIGHTED):
                assert abs(bell_value(expr, beh)) <= expr.abs_coeff_sum + 1e-12


class TestVisibilityForTarget:
    def test_maximal_target(self):
        v = visibility_for_target(CHSH, CANONICAL_ANGLES, 2 * ROOT2)
        assert v == pytest.approx(1.0, abs=1e-12)

    def test_table_target(self):
        v = visibility_for_target(CHSH, CANONICAL_ANGLES, 2.74428)
        assert v == pytest.approx(0.97033, abs=1e-4)
        beh = behavior_from_model(QuantumModel(v, CANONICAL_ANGLES))
        assert bell_value(CHSH, beh) == pytest.approx(2.74428, abs=1e-9)

    def test_above_quantum_maximum(self):
        with pytest.raises(TargetUnreachableError):
            visibility_for_target(CHSH, CANONICAL_ANGLES, 3.0)


class TestAngleOptimizer:
    def test_recovers_chsh_maximum(self):
        _, value = optimize_angles(CHSH, coarse=12)
        assert value == pytest.approx(2 * ROOT2, abs=1e-6)

    def test_weighted_reaches_table_range(self):
        # the largest tabulated violation must be reachable by the model
        _, value = optimize_angles(WEIGHTED, coarse=12)
        assert value >= 5.08671


class TestBehaviorValidation:
    def test_signaling_rejected(self):
        p = np.full((2, 2, 2, 2), 0.25)
        p[:, :, 0, 0] = [[0.5, 0.25], [0.25, 0.0]]
        with pytest.raises(BellError):
            Behavior(p).validate()

    def test_unnormalized_rejected(self):
        p = np.full((2, 2, 2, 2), 0.3)
        with pytest.raises(BellError):
            Behavior(p).validate()


class TestExpressionJson:
    def test_roundtrip_file(self, tmp_path):
        doc = {"name": "tilt", "coefficients": [[1.0, 0.5], [0.5, -1.0]]}
        path = tmp_path / "expr.json"
        path.write_text(json.dumps(doc))
        expr = expression_from_json(path)
        assert expr.name == "tilt"
        assert np.array_equal(expr.c, np.array(doc["coefficients"]))

    def test_builtin_names(self):
        assert expression_from_json("chsh") is CHSH
        assert expression_from_json("weighted") is WEIGHTED
        assert expression_from_json("eq2") is WEIGHTED

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x"}')
        with pytest.raises(BellError):
            expression_from_json(path)
