"""Goodness-of-fit checks for sampled outcome distributions.

Relative entropy and the chi-square statistic compare observed outcome
frequencies against predicted weights; the quantile function inverts the
regularized incomplete gamma so calibration counts can be checked at the
usual significance levels. Conventions: 0 ln 0 = 0, and empty cells
contribute n p_k to the chi-square sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .errors import ConfigError, SupportError


@dataclass(frozen=True)
class OutcomeHistogram:
    """Observed counts per category next to the expected probabilities."""

    counts: np.ndarray
    expected: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        expected = np.asarray(self.expected, dtype=np.float64).copy()
        if counts.ndim != 1 or expected.shape != counts.shape:
            raise ConfigError("counts and expected must be 1-D and the same length")
        if not np.issubdtype(counts.dtype, np.integer):
            raise ConfigError("counts must be integers")
        if np.any(counts < 0):
            raise ConfigError("counts must be non-negative")
        if int(np.sum(counts)) < 1:
            raise ConfigError("histogram needs at least one observation")
        if np.any(expected < 0.0) or abs(float(np.sum(expected)) - 1.0) > 1e-12:
            raise ConfigError("expected probabilities must be >= 0 and sum to 1")
        counts = counts.astype(np.int64)
        for arr in (counts, expected):
            arr.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "expected", expected)

    @property
    def n_total(self) -> int:
        return int(np.sum(self.counts))

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_total


def relative_entropy(hist: OutcomeHistogram) -> float:
    """H(f|p) = sum f_k ln(f_k / p_k); zero iff the frequencies match."""
    f = hist.frequencies
    p = hist.expected
    observed = f > 0.0
    if np.any(observed & (p == 0.0)):
        raise SupportError("observed counts in a cell with zero expected probability")
    return float(np.sum(f[observed] * np.log(f[observed] / p[observed])))


def chi_square_statistic(hist: OutcomeHistogram) -> float:
    """Pearson statistic n sum (f_k - p_k)^2 / p_k."""
    if np.any(hist.expected == 0.0):
        raise SupportError("chi-square needs strictly positive expected cells")
    f = hist.frequencies
    p = hist.expected
    return float(hist.n_total * np.sum((f - p) ** 2 / p))


def chi_square_quantile(dof: int, alpha: float) -> float:
    """Quantile Q_alpha of the chi-square law with dof degrees of freedom."""
    if dof < 1:
        raise ConfigError(f"dof must be >= 1, got {dof}")
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(2.0 * gammaincinv(0.5 * dof, alpha))


def binomial_sigma(n: int, p: float) -> float:
    """Standard deviation of an empirical fraction from n Bernoulli draws."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not (0.0 <= p <= 1.0):
        raise ConfigError(f"p must lie in [0, 1], got {p!r}")
    return math.sqrt(p * (1.0 - p) / n)
