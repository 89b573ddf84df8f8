"""
Truncated Karhunen-Loeve expansions for the separable exponential covariance

    C(x, x~) = exp(-|x1 - x~1| / l1) * exp(-|x2 - x~2| / l2)

on the rectangle [0, lx] x [0, ly].
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from constants.exceptions import Exceptions
from helpers.logger_config import logger

ROOT_XTOL = 1e-12
EVEN, ODD = 0, 1


@dataclass(frozen=True)
class EigenPairs1D:
    """Eigenpairs of exp(-|s - t| / l) on [0, length], sorted by decreasing eigenvalue."""

    correlation_length: float
    length: float
    frequencies: np.ndarray
    parity: np.ndarray
    eigenvalues: np.ndarray

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    @property
    def norms(self) -> np.ndarray:
        half = 0.5 * self.length
        w = self.frequencies
        overlap = np.sin(2 * w * half) / (2 * w)
        return np.sqrt(np.where(self.parity == EVEN, half + overlap, half - overlap))

    def evaluate(self, s: np.ndarray) -> np.ndarray:
        """L2-normalized eigenfunctions at the coordinates s, shape (len(s), count)."""
        t = np.asarray(s, dtype=float)[:, None] - 0.5 * self.length
        phase = t * self.frequencies[None, :]
        values = np.where(self.parity[None, :] == EVEN, np.cos(phase), np.sin(phase))
        return values / self.norms[None, :]


def _root(fn: Callable[[float], float], lo: float, hi: float) -> float:
    try:
        return brentq(fn, lo, hi, xtol=ROOT_XTOL)
    except ValueError as e:
        raise Exceptions.numeric_exception(f"no root bracketed in [{lo}, {hi}]: {e}")


def eigen_1d_exponential(correlation_length: float, length: float, count: int) -> EigenPairs1D:
    """
    Exact eigenpairs of the exponential kernel on an interval.

    With the interval centred at the origin, half length A and c = 1 / l, the
    frequencies w solve c cos(wA) - w sin(wA) = 0 (cosine modes) and
    w cos(wA) + c sin(wA) = 0 (sine modes). Each branch has exactly one root
    per half period, so the brackets below never miss one. The eigenvalue of
    a frequency is 2c / (w^2 + c^2).

    Args:
        correlation_length (float): l > 0.
        length (float): Interval length a > 0.
        count (int): Number of eigenpairs to return.

    Returns:
        EigenPairs1D
    """
    if not correlation_length > 0:
        raise Exceptions.parameter_exception("correlation_length", correlation_length, "> 0")
    if not length > 0:
        raise Exceptions.parameter_exception("length", length, "> 0")
    if int(count) != count or count < 1:
        raise Exceptions.parameter_exception("count", count, "an integer >= 1")

    c = 1.0 / correlation_length
    half = 0.5 * length
    n_branch = (int(count) + 1) // 2

    def even(w):
        return c * np.cos(w * half) - w * np.sin(w * half)

    def odd(w):
        return w * np.cos(w * half) + c * np.sin(w * half)

    frequencies, parity = [], []
    for k in range(1, n_branch + 1):
        frequencies.append(_root(even, (k - 1) * np.pi / half, (k - 0.5) * np.pi / half))
        parity.append(EVEN)
        frequencies.append(_root(odd, (k - 0.5) * np.pi / half, k * np.pi / half))
        parity.append(ODD)

    # roots alternate between the branches, so this order is already increasing in w
    w = np.asarray(frequencies[:count])
    return EigenPairs1D(
        correlation_length=float(correlation_length),
        length=float(length),
        frequencies=w,
        parity=np.asarray(parity[:count], dtype=np.int8),
        eigenvalues=2.0 * c / (w**2 + c**2),
    )


@dataclass(frozen=True)
class KLModes:
    """Leading products lambda_i^x lambda_j^y with their 1D mode indices."""

    eigenvalues: np.ndarray
    index_x: np.ndarray
    index_y: np.ndarray
    total_energy: float
    truncated: bool

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def energy_ratio(self) -> float:
        return float(self.eigenvalues.sum() / self.total_energy)


def tensorize(
    eig_x: EigenPairs1D, eig_y: EigenPairs1D, energy_target: float, max_modes: int
) -> KLModes:
    """
    Smallest set of 2D modes capturing energy_target of the total variance.

    The total energy is the exact trace lx * ly of the unit-variance kernel.
    When the target cannot be met with max_modes modes the expansion keeps
    max_modes and is flagged as truncated.
    """
    if not 0.0 <= energy_target <= 1.0:
        raise Exceptions.parameter_exception("energy_target", energy_target, "in [0, 1]")
    if int(max_modes) != max_modes or max_modes < 1:
        raise Exceptions.parameter_exception("max_modes", max_modes, "an integer >= 1")

    products = np.outer(eig_x.eigenvalues, eig_y.eigenvalues).ravel()
    order = np.argsort(-products, kind="stable")
    values = products[order]
    total = eig_x.length * eig_y.length
    cumulative = np.cumsum(values) / total

    reached = np.flatnonzero(cumulative >= energy_target)
    truncated = reached.size == 0 or reached[0] + 1 > max_modes
    n_modes = int(max_modes) if truncated else int(reached[0]) + 1
    n_modes = min(n_modes, len(values))
    if truncated:
        logger.warning(
            "KL energy target not reached within the mode cap",
            data={
                "energy_target": energy_target,
                "max_modes": int(max_modes),
                "energy_ratio": float(cumulative[n_modes - 1]),
            },
        )

    kept = order[:n_modes]
    return KLModes(
        eigenvalues=values[:n_modes],
        index_x=kept // eig_y.count,
        index_y=kept % eig_y.count,
        total_energy=float(total),
        truncated=bool(truncated),
    )


@dataclass(frozen=True)
class SampleVector:
    index: int
    seed: int
    xi: np.ndarray


MeanFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class KLField:
    mean: float | MeanFunction
    std: float
    eig_x: EigenPairs1D
    eig_y: EigenPairs1D
    modes: KLModes

    @property
    def n_modes(self) -> int:
        return self.modes.n_modes

    @property
    def correlation_lengths(self) -> tuple[float, float]:
        return self.eig_x.correlation_length, self.eig_y.correlation_length

    def mean_at(self, points: np.ndarray) -> np.ndarray:
        if callable(self.mean):
            return np.asarray(self.mean(points), dtype=float)
        return np.full(len(points), float(self.mean))

    def basis(self, points: np.ndarray) -> np.ndarray:
        """b_k(x) for every point and kept mode, shape (n, M)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        bx = self.eig_x.evaluate(points[:, 0])[:, self.modes.index_x]
        by = self.eig_y.evaluate(points[:, 1])[:, self.modes.index_y]
        return bx * by

    def realize(self, xi: np.ndarray, points: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.n_modes,):
            raise Exceptions.parameter_exception(
                "xi", f"shape {xi.shape}", f"shape ({self.n_modes},)"
            )
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.std == 0.0:
            return self.mean_at(points)
        weights = self.std * np.sqrt(self.modes.eigenvalues) * xi
        return self.mean_at(points) + self.basis(points) @ weights

    def variance(self, points: np.ndarray) -> np.ndarray:
        """Pointwise variance of the truncated expansion."""
        return self.std**2 * (self.basis(points) ** 2 @ self.modes.eigenvalues)

    def modes_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": np.arange(1, self.n_modes + 1),
                "eigenvalue": self.modes.eigenvalues,
                "mode_x": self.modes.index_x + 1,
                "mode_y": self.modes.index_y + 1,
            }
        )


def build_kl_field(
    mean: float | MeanFunction,
    std: float,
    correlation_lengths: tuple[float, float],
    extents: tuple[float, float],
    energy_target: float,
    max_modes: int,
) -> KLField:
    if std < 0:
        raise Exceptions.parameter_exception("std", std, ">= 0")
    eig_x = eigen_1d_exponential(correlation_lengths[0], extents[0], max_modes)
    eig_y = eigen_1d_exponential(correlation_lengths[1], extents[1], max_modes)
    modes = tensorize(eig_x, eig_y, energy_target, max_modes)
    logger.info(
        "Built KL expansion",
        data={
            "modes": modes.n_modes,
            "energy_ratio": modes.energy_ratio,
            "truncated": modes.truncated,
            "std": std,
        },
    )
    return KLField(mean=mean, std=float(std), eig_x=eig_x, eig_y=eig_y, modes=modes)


def realize(field: KLField, sample: SampleVector | np.ndarray, points: np.ndarray) -> np.ndarray:
    xi = sample.xi if isinstance(sample, SampleVector) else sample
    return field.realize(xi, points)


def sample(seed: int, n_modes: int, count: int, start: int = 0, stream: int = 0) -> list[SampleVector]:
    """
    Standard normal vectors; sample i depends only on (seed, stream, i).

    Growing a sample set therefore keeps every earlier vector bit-identical.
    The stream separates independent random inputs of the same run.
    """
    if n_modes < 1:
        raise Exceptions.parameter_exception("n_modes", n_modes, ">= 1")
    return [
        SampleVector(
            index=i,
            seed=seed,
            xi=np.random.default_rng([seed, stream, i]).standard_normal(n_modes),
        )
        for i in range(start, start + count)
    ]
