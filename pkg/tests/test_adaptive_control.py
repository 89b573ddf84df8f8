"""
Tests for the sampling test, the Lipschitz estimate, the step length and the stopping rule.
"""

import math

import numpy as np
import pytest

from constants.exceptions import DegenerateGradientError, ParameterError
from optimizer.adaptive_control import (
    STOP_CONVERGED,
    STOP_MAX_ITERATIONS,
    STOP_STAGNATION,
    STOP_VOLUME,
    estimate_lipschitz,
    sampling_test,
    step_length,
    stopping_check,
)


def rho_oracle(g, nu_it, nu_ot):
    """Direct loop evaluation of both ratios."""
    s = len(g)
    mean = sum(g) / s
    norm2 = float(mean @ mean)
    it = sum((float(gi @ mean) - norm2) ** 2 for gi in g)
    ot = sum(float(gi @ gi) - float(gi @ mean) ** 2 / norm2 for gi in g)
    return it / ((s - 1) * s * nu_it**2 * norm2**2), ot / ((s - 1) * s * nu_ot**2 * norm2)


class TestSamplingTest:
    """Test class for the augmented inner product test."""

    def test_orthogonal_pair(self):
        """Test rho_IT = 0 and rho_OT = 1 / (2 * 5.8^2 * 0.5) for two unit vectors."""
        decision = sampling_test([np.array([1.0, 0.0]), np.array([0.0, 1.0])], 0.6, 5.8)
        assert decision.rho_it == pytest.approx(0.0, abs=1e-15)
        assert decision.rho_ot == pytest.approx(1.0 / 5.8**2, rel=1e-12)
        assert decision.rho_ot == pytest.approx(0.0297, abs=5e-5)
        assert decision.passed
        assert decision.next_size == 2

    def test_identical_gradients(self):
        """Test that zero variance passes with both ratios zero."""
        g = np.array([0.3, -1.2, 2.0])
        decision = sampling_test([g, g.copy(), g.copy()])
        assert decision.rho_it == pytest.approx(0.0, abs=1e-15)
        assert decision.rho_ot == pytest.approx(0.0, abs=1e-15)
        assert decision.passed

    def test_matches_oracle(self):
        """Test random instances against the loop formula."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            size = int(rng.integers(2, 9))
            g = [rng.normal(1.0, 2.0, size=6) for _ in range(size)]
            decision = sampling_test(g, 0.6, 5.8, max_size=10_000)
            rho_it, rho_ot = rho_oracle(g, 0.6, 5.8)
            assert decision.rho_it == pytest.approx(rho_it, rel=1e-10, abs=1e-12)
            assert decision.rho_ot == pytest.approx(rho_ot, rel=1e-10, abs=1e-12)

    def test_scale_invariance(self):
        """Test that scaling every gradient leaves both ratios unchanged."""
        rng = np.random.default_rng(5)
        g = [rng.normal(size=4) + 1.0 for _ in range(5)]
        base = sampling_test(g)
        scaled = sampling_test([7.5 * v for v in g])
        assert scaled.rho_it == pytest.approx(base.rho_it, rel=1e-10)
        assert scaled.rho_ot == pytest.approx(base.rho_ot, rel=1e-10)

    def test_failure_grows_sample(self):
        """Test next size ceil(rho S), capped at the maximum."""
        g = [np.array([1.0, 0.0]), np.array([-0.9, 0.0]), np.array([0.2, 0.0])]
        decision = sampling_test(g, 0.6, 5.8, max_size=1000)
        assert not decision.passed
        assert decision.next_size == math.ceil(decision.rho_it * 3)
        assert sampling_test(g, 0.6, 5.8, max_size=5).next_size == 5

    def test_single_sample(self):
        """Test that one sample is degenerate and passes."""
        decision = sampling_test([np.ones(3)])
        assert decision.degenerate and decision.passed
        assert decision.next_size == 1

    def test_zero_mean(self):
        """Test that a vanishing mean gradient is reported."""
        with pytest.raises(DegenerateGradientError):
            sampling_test([np.array([1.0, 0.0]), np.array([-1.0, 0.0])])


class TestLipschitz:
    """Test class for the Lipschitz estimate."""

    def test_hand_computed(self):
        """Test the formula on two common samples."""
        now = {0: np.array([3.0, 4.0]), 1: np.array([1.0, 1.0]), 5: np.array([9.0, 9.0])}
        prev = {0: np.zeros(2), 1: np.array([1.0, 0.0])}
        value = estimate_lipschitz(now, prev, theta_prev_max=2.0, elapsed_time=0.5, material_volume=0.3)
        assert value == pytest.approx((5.0 + 1.0) / (0.5 * 2.0 * 0.3 * 2))

    def test_homogeneous_in_gradients(self):
        """Test L(c g) = c L(g)."""
        now = {0: np.array([1.0, 2.0])}
        prev = {0: np.array([0.5, -1.0])}
        base = estimate_lipschitz(now, prev, 1.0, 0.1, 0.4)
        scaled = estimate_lipschitz({0: 3 * now[0]}, {0: 3 * prev[0]}, 1.0, 0.1, 0.4)
        assert scaled == pytest.approx(3 * base)

    def test_no_previous_gradients(self):
        """Test that the first iteration has no estimate."""
        assert estimate_lipschitz({0: np.ones(2)}, {}, 1.0, 0.1, 0.4) is None
        assert estimate_lipschitz({0: np.ones(2)}, {}, 1.0, 0.1, 0.4, previous_estimate=2.0) == 2.0

    def test_vanishing_denominator_carries_forward(self):
        """Test that a zero elapsed time keeps the previous estimate."""
        now, prev = {0: np.ones(2)}, {0: np.zeros(2)}
        assert estimate_lipschitz(now, prev, 1.0, 0.0, 0.4, previous_estimate=7.0) == 7.0


class TestStepLength:
    """Test class for the Lipschitz-based step length."""

    def test_unclamped_value(self):
        """Test alpha(L = 1) = 1 / (1 + 0.36 + 33.64) = 1 / 35."""
        assert step_length(1.0, 0.6, 5.8, alpha_min=0.0, alpha_max=1.0) == pytest.approx(
            1.0 / 35.0, rel=1e-15
        )

    def test_clamping(self):
        """Test that alpha stays within [alpha_min, alpha_max]."""
        assert step_length(1.0, alpha_min=1e-4, alpha_max=0.01) == 0.01
        assert step_length(1e9, alpha_min=1e-4, alpha_max=0.01) == 1e-4

    @pytest.mark.parametrize("lipschitz", [None, 0.0])
    def test_no_estimate(self, lipschitz):
        """Test that a missing or zero estimate uses alpha_max."""
        assert step_length(lipschitz, alpha_max=0.02) == 0.02

    def test_negative(self):
        """Test that a negative estimate raises."""
        with pytest.raises(ParameterError):
            step_length(-1.0)


class TestStoppingCheck:
    """Test class for the stopping rule."""

    HISTORY = [10.0, 10.05, 9.99, 10.02, 10.01, 10.0]

    def test_stagnation_and_volume(self):
        """Test that relative changes below 1% with a met volume stop the run."""
        decision = stopping_check(self.HISTORY, 0.304, 0.3, iteration=6, max_iterations=100)
        assert decision.stop
        assert decision.reason == STOP_CONVERGED

    def test_volume_not_met(self):
        """Test that the 'and' combinator needs both criteria."""
        assert not stopping_check(self.HISTORY, 0.35, 0.3, 6, 100).stop

    def test_or_combinator(self):
        """Test that 'or' stops on either criterion."""
        assert stopping_check(self.HISTORY, 0.35, 0.3, 6, 100, combinator="or").reason == STOP_STAGNATION
        assert stopping_check([10.0, 5.0], 0.3, 0.3, 2, 100, combinator="or").reason == STOP_VOLUME

    def test_short_history(self):
        """Test that stagnation needs more than window entries."""
        assert not stopping_check(self.HISTORY[:5], 0.3, 0.3, 5, 100).stop

    def test_large_change(self):
        """Test that a change above the tolerance keeps the run going."""
        history = [10.0, 10.5, 10.0, 10.0, 10.0, 10.0]
        assert not stopping_check(history, 0.3, 0.3, 6, 100).stop

    def test_iteration_cap(self):
        """Test the iteration cap regardless of the history."""
        decision = stopping_check([1.0], 0.9, 0.3, iteration=10, max_iterations=10)
        assert decision.stop
        assert decision.reason == STOP_MAX_ITERATIONS

    def test_invalid_combinator(self):
        """Test that an unknown combinator raises."""
        with pytest.raises(ParameterError):
            stopping_check(self.HISTORY, 0.3, 0.3, 6, 100, combinator="xor")
