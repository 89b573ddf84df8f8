"""
Sample-size, step-length and stopping decisions of the adaptive loop.
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from constants.defaults import (
    ALPHA_INITIAL,
    ALPHA_MIN,
    MAX_SAMPLE_SIZE,
    NU_IT,
    NU_OT,
    STAGNATION_TOLERANCE,
    STAGNATION_WINDOW,
    VOLUME_TOLERANCE,
)
from constants.exceptions import Exceptions
from helpers.logger_config import logger

DENOMINATOR_FLOOR = 1e-14

STOP_MAX_ITERATIONS = "max_iterations"
STOP_CONVERGED = "converged"
STOP_STAGNATION = "stagnation"
STOP_VOLUME = "volume"


@dataclass(frozen=True)
class SamplingDecision:
    rho_it: float
    rho_ot: float
    passed: bool
    next_size: int
    degenerate: bool = False

    @property
    def rho(self) -> float:
        return max(self.rho_it, self.rho_ot)


def sampling_test(
    gradients: Sequence[np.ndarray],
    nu_it: float = NU_IT,
    nu_ot: float = NU_OT,
    max_size: int = MAX_SAMPLE_SIZE,
) -> SamplingDecision:
    """
    Augmented inner product test on per-sample gradients g_i with mean g.

        rho_IT = sum_i (g_i . g - |g|^2)^2 / ((S - 1) S nu_IT^2 |g|^4)
        rho_OT = sum_i (|g_i|^2 - (g_i . g)^2 / |g|^2) / ((S - 1) S nu_OT^2 |g|^2)

    The test passes when both ratios are at most one. Otherwise the next
    sample size is ceil(max(rho_IT, rho_OT) * S), capped at max_size. A single
    sample cannot be tested and counts as a pass.

    Raises:
        DegenerateGradientError: The mean gradient vanished.
    """
    size = len(gradients)
    if size < 2:
        return SamplingDecision(0.0, 0.0, True, size, degenerate=True)
    g = np.vstack([np.asarray(v, dtype=float) for v in gradients])
    mean = g.mean(axis=0)
    mean_sq = float(mean @ mean)
    if mean_sq == 0.0:
        raise Exceptions.degenerate_gradient_exception()

    inner = g @ mean
    scale = (size - 1) * size
    rho_it = float(np.sum((inner - mean_sq) ** 2) / (scale * nu_it**2 * mean_sq**2))
    orthogonal = np.einsum("ij,ij->i", g, g) - inner**2 / mean_sq
    # clip round-off below zero
    rho_ot = float(np.sum(np.maximum(orthogonal, 0.0)) / (scale * nu_ot**2 * mean_sq))

    passed = rho_it <= 1.0 and rho_ot <= 1.0
    next_size = size
    if not passed:
        next_size = min(max(math.ceil(max(rho_it, rho_ot) * size), size), max_size)
    return SamplingDecision(rho_it, rho_ot, passed, next_size)


def estimate_lipschitz(
    gradients_now: Mapping[int, np.ndarray],
    gradients_prev: Mapping[int, np.ndarray],
    theta_prev_max: float,
    elapsed_time: float,
    material_volume: float,
    previous_estimate: float | None = None,
) -> float | None:
    """
    L_k = sum_i |dJ_i(W_k) - dJ_i(W_{k-1})| / (t |theta_{k-1}|_inf |W_k| S).

    Gradients are keyed by sample index and restricted to the persistent
    vertices. The sum and S run over the indices present in both iterations.
    A vanishing denominator carries the previous estimate forward; without
    previous gradients there is no estimate.
    """
    common = sorted(set(gradients_now) & set(gradients_prev))
    if not common:
        return previous_estimate
    denominator = elapsed_time * theta_prev_max * material_volume * len(common)
    if denominator <= DENOMINATOR_FLOOR:
        logger.warning(
            "Lipschitz denominator vanished, keeping previous estimate",
            data={"denominator": denominator, "previous": previous_estimate},
        )
        return previous_estimate
    numerator = sum(
        float(np.linalg.norm(np.asarray(gradients_now[i]) - np.asarray(gradients_prev[i])))
        for i in common
    )
    return numerator / denominator


def step_length(
    lipschitz: float | None,
    nu_it: float = NU_IT,
    nu_ot: float = NU_OT,
    alpha_min: float = ALPHA_MIN,
    alpha_max: float = ALPHA_INITIAL,
) -> float:
    """alpha = clamp(1 / ((1 + nu_IT^2 + nu_OT^2) L), alpha_min, alpha_max)."""
    if lipschitz is None:
        return alpha_max
    if lipschitz < 0:
        raise Exceptions.parameter_exception("lipschitz", lipschitz, ">= 0")
    if lipschitz == 0.0:
        return alpha_max
    alpha = 1.0 / ((1.0 + nu_it**2 + nu_ot**2) * lipschitz)
    return float(min(max(alpha, alpha_min), alpha_max))


@dataclass(frozen=True)
class StopDecision:
    stop: bool
    reason: str = ""


def stopping_check(
    cost_history: Sequence[float],
    volume_fraction: float,
    target_fraction: float,
    iteration: int,
    max_iterations: int,
    combinator: str = "and",
    window: int = STAGNATION_WINDOW,
    tolerance: float = STAGNATION_TOLERANCE,
    volume_tolerance: float = VOLUME_TOLERANCE,
) -> StopDecision:
    """
    Stop on the iteration cap, or when the penalized cost has stagnated
    (|J_k - J_{k-i}| <= tolerance J_k for i = 1..window) combined with the
    volume criterion |vol - target| <= volume_tolerance by `combinator`.
    """
    if combinator not in ("and", "or"):
        raise Exceptions.parameter_exception("combinator", combinator, "'and' or 'or'")
    if iteration >= max_iterations:
        return StopDecision(True, STOP_MAX_ITERATIONS)

    stagnated = False
    if len(cost_history) > window:
        current = cost_history[-1]
        stagnated = all(
            abs(current - cost_history[-1 - i]) <= tolerance * abs(current)
            for i in range(1, window + 1)
        )
    volume_met = abs(volume_fraction - target_fraction) <= volume_tolerance

    if combinator == "and":
        return StopDecision(True, STOP_CONVERGED) if stagnated and volume_met else StopDecision(False)
    if stagnated:
        return StopDecision(True, STOP_STAGNATION)
    if volume_met:
        return StopDecision(True, STOP_VOLUME)
    return StopDecision(False)
