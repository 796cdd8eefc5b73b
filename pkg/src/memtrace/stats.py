"""Distribution statistics for access-interval populations: empirical CDF,
nearest-rank percentiles, five-number summaries with histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple


class EmptyInputError(ValueError):
    """Statistic requested over an empty population."""


class InvalidPercentileError(ValueError):
    """Percentile fraction outside (0, 1]."""


@dataclass(frozen=True, slots=True)
class DistributionSummary:
    count: int
    min_us: int
    q1_us: int
    median_us: int
    q3_us: int
    max_us: int
    mean_us: Fraction
    histogram: Tuple[Tuple[float, float, int], ...]


def ecdf(values: Sequence[int]) -> List[Tuple[int, float]]:
    """Sorted unique values with F(v) = (# of samples <= v) / n."""
    if not values:
        raise EmptyInputError("ecdf of empty population")
    n = len(values)
    ordered = sorted(values)
    points: List[Tuple[int, float]] = []
    below = 0
    i = 0
    while i < n:
        v = ordered[i]
        j = i
        while j < n and ordered[j] == v:
            j += 1
        points.append((v, j / n))
        i = j
    return points


def percentile(values: Sequence[int], p) -> int:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value.

    Floats are read at their decimal face value (0.9 means 9/10) so ranks do
    not drift on binary rounding.
    """
    if not values:
        raise EmptyInputError("percentile of empty population")
    frac = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    if not 0 < frac <= 1:
        raise InvalidPercentileError(f"p={p} not in (0, 1]")
    ordered = sorted(values)
    rank = math.ceil(frac * len(ordered))
    return ordered[rank - 1]


def summarize(values: Sequence[int]) -> DistributionSummary:
    """Five-number summary plus an equal-width histogram with ceil(sqrt(n)) bins."""
    if not values:
        raise EmptyInputError("summary of empty population")
    ordered = sorted(values)
    n = len(ordered)
    lo, hi = ordered[0], ordered[-1]
    if lo == hi:
        histogram = ((float(lo), float(hi), n),)
    else:
        k = math.ceil(math.sqrt(n))
        width = (hi - lo) / k
        counts = [0] * k
        for v in ordered:
            idx = min(k - 1, int((v - lo) / width))
            counts[idx] += 1
        histogram = tuple(
            (lo + i * width, hi if i == k - 1 else lo + (i + 1) * width, counts[i])
            for i in range(k)
        )
    return DistributionSummary(
        count=n,
        min_us=lo,
        q1_us=ordered[math.ceil(0.25 * n) - 1],
        median_us=ordered[math.ceil(0.5 * n) - 1],
        q3_us=ordered[math.ceil(0.75 * n) - 1],
        max_us=hi,
        mean_us=Fraction(sum(ordered), n),
        histogram=histogram,
    )
