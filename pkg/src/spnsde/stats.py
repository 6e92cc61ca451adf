"""Histograms, confidence intervals, distribution distances and mode finding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable

import numpy as np


@dataclass(frozen=True, eq=False)
class EmpiricalPmf:
    """Probability mass on integer token counts.

    ``sample_count`` is 0 for distributions computed exactly.
    """

    support: np.ndarray
    mass: np.ndarray
    sample_count: int = 0

    @classmethod
    def from_arrays(cls, support, mass, sample_count: int = 0) -> "EmpiricalPmf":
        support = np.asarray(support, dtype=np.int64)
        mass = np.asarray(mass, dtype=np.float64)
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("pmf masses must be finite and nonnegative")
        order = np.argsort(support, kind="stable")
        support, mass = support[order], mass[order]
        if support.size and np.any(np.diff(support) == 0):
            uniq, inv = np.unique(support, return_inverse=True)
            mass = np.bincount(inv, weights=mass)
            support = uniq
        keep = mass > 0
        support, mass = support[keep], mass[keep]
        total = mass.sum()
        if total <= 0:
            raise ValueError("pmf has no mass")
        return cls(support, mass / total, int(sample_count))

    @classmethod
    def from_dict(cls, d: dict[int, float], sample_count: int = 0) -> "EmpiricalPmf":
        return cls.from_arrays(list(d), list(d.values()), sample_count)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support.tolist(), self.mass.tolist()))

    def mean(self) -> float:
        return float(self.support @ self.mass)

    def __getitem__(self, k: int) -> float:
        i = np.searchsorted(self.support, k)
        if i < self.support.size and self.support[i] == k:
            return float(self.mass[i])
        return 0.0


def histogram(samples: Iterable[float], lo: int | None = None, hi: int | None = None) -> EmpiricalPmf:
    """Unit-width bins: round each sample to the nearest integer, clamp into [lo, hi]."""
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sample set")
    k = np.floor(x + 0.5).astype(np.int64)  # half-up, not banker's rounding
    if lo is not None or hi is not None:
        k = np.clip(k, lo, hi)
    support, counts = np.unique(k, return_counts=True)
    return EmpiricalPmf(support, counts / x.size, int(x.size))


def rebin(pmf: EmpiricalPmf, width: int) -> EmpiricalPmf:
    """Merge unit bins into bins of ``width``, each located at its lower edge."""
    if width < 1:
        raise ValueError("width must be >= 1")
    return EmpiricalPmf.from_arrays((pmf.support // width) * width, pmf.mass, pmf.sample_count)


@dataclass(frozen=True)
class MeanCI:
    mean: float
    halfwidth: float
    level: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.halfwidth

    @property
    def high(self) -> float:
        return self.mean + self.halfwidth

    def overlaps(self, other: "MeanCI") -> bool:
        return self.low <= other.high and other.low <= self.high


def mean_ci(samples, level: float = 0.95) -> MeanCI:
    """Normal-quantile interval: mean +/- z * s / sqrt(n)."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    s = float(np.std(x, ddof=1))
    return MeanCI(float(x.mean()), z * s / math.sqrt(n), level, n)


def total_variation(p: EmpiricalPmf, q: EmpiricalPmf) -> float:
    support = np.union1d(p.support, q.support)
    a = np.zeros(support.size)
    b = np.zeros(support.size)
    a[np.searchsorted(support, p.support)] = p.mass
    b[np.searchsorted(support, q.support)] = q.mass
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def find_modes(pmf: EmpiricalPmf, min_separation: int = 1, min_mass: float = 0.0,
               bin_width: int = 1) -> list[tuple[int, float]]:
    """Local maxima of the window-3 moving average of ``pmf``.

    The pmf is laid out densely on a grid of spacing ``bin_width`` (use the
    width passed to :func:`rebin`) between its extreme support points; edge
    bins average over the neighbours that exist. A flat top is reported
    once, at its leftmost point. Among peaks closer than ``min_separation``
    the heavier one wins. Returns (location, smoothed mass), by location.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    lo = int(pmf.support[0])
    slots = (pmf.support - lo) // bin_width
    dense = np.zeros(int(slots[-1]) + 1)
    np.add.at(dense, slots, pmf.mass)
    n = dense.size
    padded = np.concatenate(([0.0], dense, [0.0]))
    sums = padded[:-2] + padded[1:-1] + padded[2:]
    width = np.full(n, 3.0)
    width[0] -= 1
    width[-1] -= 1
    if n == 1:
        width[0] = 1.0
    smooth = sums / width

    peaks = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and smooth[j + 1] == smooth[i]:
            j += 1
        left_ok = i == 0 or smooth[i - 1] < smooth[i]
        right_ok = j == n - 1 or smooth[j + 1] < smooth[i]
        if left_ok and right_ok and smooth[i] >= min_mass and smooth[i] > 0:
            peaks.append((lo + i * bin_width, float(smooth[i])))
        i = j + 1

    kept: list[tuple[int, float]] = []
    for loc, m in sorted(peaks, key=lambda p: (-p[1], p[0])):
        if all(abs(loc - k) >= min_separation for k, _ in kept):
            kept.append((loc, m))
    return sorted(kept)
