"""Swap-feasibility model: how many bytes can round-trip host<->device inside
an access gap without slowing training, and which blocks qualify.

A block of size S hides behind a gap of T seconds iff
S/B_d2h + S/B_h2d <= T, i.e. S <= T / (1/B_d2h + 1/B_h2d).
All units are decimal SI (1 GB/s = 1e9 bytes/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .lifetime import AtiSeries, access_sequence, peak_memory
from .trace import BlockRecord

US_PER_S = 10**6


@dataclass(frozen=True, slots=True)
class BandwidthConfig:
    b_d2h: float  # device-to-host bytes/second
    b_h2d: float  # host-to-device bytes/second

    def __post_init__(self):
        if self.b_d2h <= 0 or self.b_h2d <= 0:
            raise ValueError("bandwidths must be strictly positive")


# Pinned-memory bandwidths measured on the reference GPU setup; override per machine.
DEFAULT_BANDWIDTHS = BandwidthConfig(b_d2h=6.4e9, b_h2d=6.3e9)


class SwapCandidate(NamedTuple):
    block_id: int
    size_bytes: int
    gap_us: int
    gap_start_us: int
    gap_end_us: int
    max_swap_bytes: Fraction
    feasible: bool
    margin_bytes: int  # max_swap_bytes - size_bytes, rounded to whole bytes
    overlaps_peak: bool


@dataclass(frozen=True, slots=True)
class SwapPlan:
    candidates: Tuple[SwapCandidate, ...]
    estimated_savings_bytes: int  # sum of feasible, peak-overlapping sizes


def _round_trip_seconds_per_byte(bw: BandwidthConfig) -> Fraction:
    return 1 / Fraction(bw.b_d2h) + 1 / Fraction(bw.b_h2d)


def max_swap_size(gap_us: int, bw: BandwidthConfig) -> Fraction:
    """Largest byte count that can leave and return within the gap (exact rational)."""
    if gap_us < 0:
        raise ValueError("gap must be non-negative")
    return Fraction(gap_us, US_PER_S) / _round_trip_seconds_per_byte(bw)


def min_hiding_interval(size_bytes: int, bw: BandwidthConfig) -> int:
    """Smallest gap (whole microseconds) whose max_swap_size covers the block."""
    if size_bytes < 0:
        raise ValueError("size must be non-negative")
    return math.ceil(size_bytes * _round_trip_seconds_per_byte(bw) * US_PER_S)


def find_candidates(
    index: Dict[int, BlockRecord],
    atis: Dict[int, AtiSeries],
    bw: BandwidthConfig,
    peak_window: Optional[Tuple[int, int]] = None,
    include_boundary_gaps: bool = False,
) -> List[SwapCandidate]:
    """One candidate per block with at least one access gap, judged at its
    largest gap.  peak_window defaults to the instant of peak memory."""
    if peak_window is None:
        _, peak_ts = peak_memory(index)
        peak_window = (peak_ts, peak_ts)
    lo, hi = peak_window
    # bytes hidden per microsecond of gap, hoisted out of the per-block loop
    per_us = Fraction(1, US_PER_S) / _round_trip_seconds_per_byte(bw)
    num, den = per_us.numerator, per_us.denominator
    out: List[SwapCandidate] = []
    for bid, series in atis.items():
        intervals = series.intervals_us
        if not intervals:
            continue
        rec = index[bid]
        ts = access_sequence(rec, include_boundary_gaps)
        gap = max(intervals)
        best_i = intervals.index(gap)  # earliest maximal gap on ties
        gap_start, gap_end = ts[best_i], ts[best_i + 1]
        size = rec.size_bytes
        scaled = gap * num
        # round(scaled/den) - size via integers (round half to even)
        q, r = divmod(scaled, den)
        if 2 * r > den or (2 * r == den and q & 1):
            q += 1
        out.append(
            SwapCandidate(
                block_id=bid,
                size_bytes=size,
                gap_us=gap,
                gap_start_us=gap_start,
                gap_end_us=gap_end,
                max_swap_bytes=Fraction(scaled, den),
                feasible=size * den <= scaled,
                margin_bytes=q - size,
                overlaps_peak=gap_start <= hi and gap_end >= lo,
            )
        )
    return out


def rank_candidates(candidates: Sequence[SwapCandidate]) -> SwapPlan:
    """Feasible first (peak-overlap, then size, then margin, descending);
    infeasible after, by size descending."""
    feasible = sorted(
        (c for c in candidates if c.feasible),
        key=lambda c: (not c.overlaps_peak, -c.size_bytes, -c.margin_bytes),
    )
    infeasible = sorted(
        (c for c in candidates if not c.feasible), key=lambda c: -c.size_bytes
    )
    savings = sum(c.size_bytes for c in feasible if c.overlaps_peak)
    return SwapPlan(candidates=tuple(feasible + infeasible), estimated_savings_bytes=savings)


def load_bandwidth_config(path) -> BandwidthConfig:
    """Read ``b_d2h_bytes_per_s`` / ``b_h2d_bytes_per_s`` from a key=value file."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if sep:
                values[key.strip()] = value.strip()
    try:
        return BandwidthConfig(
            b_d2h=float(values["b_d2h_bytes_per_s"]),
            b_h2d=float(values["b_h2d_bytes_per_s"]),
        )
    except KeyError as exc:
        raise ValueError(f"bandwidth config {path} missing key {exc}") from None
