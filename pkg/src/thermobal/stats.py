"""Small statistics helpers: intervals, binomial CIs, autocorrelation.

Identity checks in this package pass only when the identity holds within
propagated intervals, so interval arithmetic is kept explicit and
conservative (endpoint arithmetic, no distributional shortcuts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Interval",
    "wilson_interval",
    "ratio_interval",
    "integrated_autocorr_time",
    "batch_means_se",
]

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with conservative endpoint arithmetic."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"bad interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "Interval":
        return cls(float(x), float(x))

    @classmethod
    def center_half(cls, center, half_width) -> "Interval":
        return cls(center - half_width, center + half_width)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def __add__(self, other):
        other = _coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        prods = [
            self.lo * other.lo, self.lo * other.hi,
            self.hi * other.lo, self.hi * other.hi,
        ]
        return Interval(min(prods), max(prods))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.lo <= 0.0 <= other.hi:
            raise ZeroDivisionError(f"interval divisor straddles zero: {other}")
        return self * Interval(1.0 / other.hi, 1.0 / other.lo)

    def log(self) -> "Interval":
        if self.lo <= 0:
            raise ValueError(f"log of non-positive interval {self}")
        return Interval(math.log(self.lo), math.log(self.hi))

    def exp(self) -> "Interval":
        return Interval(math.exp(self.lo), math.exp(self.hi))

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def overlaps(self, other) -> bool:
        other = _coerce(other)
        return self.lo <= other.hi and other.lo <= self.hi


def _coerce(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(x)


def wilson_interval(hits, n, z=Z95) -> Interval:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need n > 0")
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return Interval(max(0.0, center - half), min(1.0, center + half))


def ratio_interval(num: Interval, den: Interval) -> Interval:
    """Interval for num/den; conservative endpoint division."""
    return num / den


def batch_means_se(x, n_blocks=50) -> float:
    """Standard error of the mean of a correlated series via batch means.

    Robust for non-reversible chains (e.g. with a deterministic swap
    schedule), where truncated-autocorrelation estimators can be fooled by
    alternating signs.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    n_blocks = min(n_blocks, max(2, n // 4))
    block = n // n_blocks
    trimmed = x[: block * n_blocks].reshape(n_blocks, block)
    means = trimmed.mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_blocks))


def integrated_autocorr_time(x, max_lag=None) -> float:
    """Integrated autocorrelation time via Geyer's initial positive sequence.

    tau = 1 + 2 * sum of autocorrelations, truncated at the first
    non-positive pairwise sum.  Effective sample size of n correlated draws
    is then roughly n / tau.  Always returns >= 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return 1.0
    x = x - x.mean()
    var = np.dot(x, x) / n
    if var == 0:
        return 1.0
    if max_lag is None:
        max_lag = min(n - 2, 2000)
    # FFT autocovariance up to max_lag
    m = 1
    while m < 2 * n:
        m <<= 1
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conjugate(f), m)[: max_lag + 1].real / n
    rho = acov / acov[0]
    tau = 1.0
    k = 1
    while k + 1 <= max_lag:
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
        k += 2
    return float(max(1.0, tau))
