"""Laplace and exponential mechanisms with an explicit, seedable randomness source."""
from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

import numpy as np

from .metric import InputError

_MANTISSA = 2 ** 53


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon_p, delta_p) differential-privacy budget.

    ``delta_p = 0`` is accepted here (pure-DP claims are handy for audits) but
    :meth:`require_approximate` rejects it wherever the budget feeds the
    private coverage routine, whose per-pick epsilon degenerates at zero delta.
    """

    epsilon_p: float
    delta_p: float

    def __post_init__(self):
        if not self.epsilon_p > 0:
            raise InputError(f"epsilon_p must be > 0, got {self.epsilon_p}")
        if not 0 <= self.delta_p <= 1:
            raise InputError(f"delta_p must lie in [0, 1], got {self.delta_p}")

    def require_approximate(self) -> PrivacyBudget:
        if self.delta_p <= 0:
            raise InputError("delta_p must be > 0 for (epsilon, delta) mechanisms")
        return self


class RandomSource:
    """Seeded PCG64 stream with independent substreams derived by index."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if int(seed) != seed or not 0 <= seed < 2 ** 64:
            raise InputError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(int(i) for i in path)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, index: int) -> RandomSource:
        return RandomSource(self.seed, self.path + (index,))

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        k = self.generator.integers(0, _MANTISSA, size=size, dtype=np.int64)
        return (k + 0.5) / _MANTISSA

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, path={self.path})"


def laplace_sample(scale: float, rng: RandomSource, size=None):
    """Draws from Lap(scale) by inverting the CDF at a uniform variate."""
    if not scale > 0:
        raise InputError(f"Laplace scale must be > 0, got {scale}")
    u = rng.uniform(size)
    if size is None:
        return scale * math.log(2 * u) if u < 0.5 else -scale * math.log(2 - 2 * u)
    return np.where(u < 0.5, scale * np.log(2 * u), -scale * np.log(2 - 2 * np.minimum(u, 1.0)))


def laplace_cdf(x, scale: float):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x < 0, 0.5 * np.exp(x / scale), 1 - 0.5 * np.exp(-x / scale))


def selection_probabilities(scores: Sequence[float], eps_prime: float) -> np.ndarray:
    """Softmax of ``eps_prime * scores``, computed after subtracting the max."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise InputError("scores must be nonempty")
    if np.isnan(scores).any():
        raise InputError("scores contain NaN")
    if not eps_prime >= 0:
        raise InputError(f"eps_prime must be >= 0, got {eps_prime}")
    logits = eps_prime * scores if eps_prime > 0 else np.zeros_like(scores)
    w = np.exp(logits - logits.max())
    return w / w.sum()


def exponential_select(scores: Sequence[float], eps_prime: float, rng: RandomSource, size=None):
    """Returns index i with probability proportional to exp(eps_prime * scores[i])."""
    probs = selection_probabilities(scores, eps_prime)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    u = rng.uniform(size)
    idx = np.searchsorted(cdf, u, side="right")
    # guards against cdf plateaus from zero-probability tails
    idx = np.minimum(idx, probs.size - 1)
    return int(idx) if size is None else idx


def noisy_count(count: float, sensitivity: float, eps: float, rng: RandomSource, size=None):
    if not sensitivity > 0:
        raise InputError("sensitivity must be > 0")
    if not eps > 0:
        raise InputError("eps must be > 0")
    return count + laplace_sample(sensitivity / eps, rng, size)
