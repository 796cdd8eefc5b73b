"""Iterative-structure detection: tokenizes traces into (kind, size, class)
shapes and finds the shortest exactly-repeating period after a warm-up prefix."""

from __future__ import annotations

import array
import operator
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .lifetime import memory_timeline
from .trace import BlockClass, EventKind, MemoryEvent, Trace, build_block_index


class NoPeriodFoundError(Exception):
    """No period with at least two full repetitions within the warm-up budget."""


class EventToken(NamedTuple):
    kind: EventKind
    size_bytes: int
    block_class: BlockClass


@dataclass(frozen=True, slots=True)
class IterationStructure:
    warmup_len: int
    period_len: int
    iteration_count: int
    boundaries: Tuple[int, ...]  # seq (or token index) of each iteration's first event


def tokenize(trace: Trace) -> List[EventToken]:
    """One token per event, order preserved; timestamps, ids and addresses dropped."""
    return [EventToken(ev.kind, ev.size_bytes, ev.block_class) for ev in trace.events]


def _suffix_match_len(mv: memoryview, item: int, n: int, p: int) -> int:
    """Longest m with tokens[n-m:] == tokens[n-p-m:n-p].

    mv views the interned token ids packed as fixed-width items of `item`
    bytes; slice equality compares them at C speed, and a binary search works
    because agreement of a suffix pair implies agreement of every shorter one.
    """
    lo, hi = 0, n - p
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mv[item * (n - mid):] == mv[item * (n - p - mid):item * (n - p)]:
            lo = mid
        else:
            hi = mid - 1
    return lo


def detect_iterations(
    tokens: Sequence[EventToken], max_warmup: Optional[int] = None
) -> IterationStructure:
    """Smallest period that exactly repeats (>= 2 full times, final repetition
    may be truncated) after some warm-up prefix; ties go to the smallest warm-up.

    max_warmup=None allows a warm-up of up to one candidate period.
    Boundaries are token indices.
    """
    n = len(tokens)
    if n == 0:
        raise ValueError("tokens must be non-empty")
    if max_warmup is not None and not 0 <= max_warmup < n:
        raise ValueError(f"max_warmup={max_warmup} out of range for {n} tokens")

    interned: Dict[EventToken, int] = {}
    # setdefault evaluates len() before inserting, so each new token gets
    # the next integer id
    setdefault = interned.setdefault
    ids = [setdefault(t, len(interned)) for t in tokens]
    typecode = "I" if len(interned) <= 0xFFFFFFFF else "Q"
    buf = array.array(typecode, ids)
    mv = memoryview(buf.tobytes())
    item = buf.itemsize

    # For shift p, the matched suffix is the longest run of i (from the top)
    # with tokens[i] == tokens[i+p]; everything below it must be warm-up.
    for p in range(1, n // 2 + 1):
        match = _suffix_match_len(mv, item, n, p)
        warmup = n - p - match
        budget = p if max_warmup is None else max_warmup
        if warmup <= budget and (n - warmup) // p >= 2:
            count = (n - warmup) // p
            return IterationStructure(
                warmup_len=warmup,
                period_len=p,
                iteration_count=count,
                boundaries=tuple(warmup + i * p for i in range(count)),
            )
    raise NoPeriodFoundError(
        f"no period with >= 2 full repetitions in {n} tokens"
    )


def detect_trace_iterations(
    trace: Trace, max_warmup: Optional[int] = None
) -> IterationStructure:
    """detect_iterations over a trace, with boundaries mapped to event seq values."""
    # plain (kind, size, class) tuples compare equal to EventToken and are
    # cheaper to build in bulk
    token_fields = operator.itemgetter(
        MemoryEvent._fields.index("kind"),
        MemoryEvent._fields.index("size_bytes"),
        MemoryEvent._fields.index("block_class"),
    )
    structure = detect_iterations(list(map(token_fields, trace.events)), max_warmup)
    return IterationStructure(
        warmup_len=structure.warmup_len,
        period_len=structure.period_len,
        iteration_count=structure.iteration_count,
        boundaries=tuple(trace.events[i].seq for i in structure.boundaries),
    )


@dataclass(frozen=True, slots=True)
class IterationWindow:
    index: int
    boundary_seq: int
    boundary_us: int
    live_bytes_at_boundary: int
    peak_bytes: int


@dataclass(frozen=True, slots=True)
class StabilityReport:
    iterations: Tuple[IterationWindow, ...]
    stable: bool  # all per-iteration peaks equal


def iteration_stability(
    structure: IterationStructure,
    trace: Trace,
    index=None,
    timeline=None,
) -> StabilityReport:
    """Per-iteration live bytes at the boundary and peak within the iteration.

    structure.boundaries must hold seq values of this trace (as produced by
    detect_trace_iterations).  A precomputed block index and timeline may be
    passed to avoid recomputation; they must belong to the same trace.
    """
    by_seq = {ev.seq: i for i, ev in enumerate(trace.events)}
    if timeline is None:
        if index is None:
            index = build_block_index(trace)
        timeline = memory_timeline(index)
    times = [pt.timestamp_us for pt in timeline]

    import bisect

    def live_at(ts: int) -> int:
        i = bisect.bisect_right(times, ts) - 1
        return timeline[i].live_bytes if i >= 0 else 0

    boundaries = list(structure.boundaries)
    windows: List[IterationWindow] = []
    last_ts = trace.events[-1].timestamp_us
    for i, seq in enumerate(boundaries):
        start_ts = trace.events[by_seq[seq]].timestamp_us
        if i + 1 < len(boundaries):
            end_ts = trace.events[by_seq[boundaries[i + 1]]].timestamp_us
        else:
            end_ts = last_ts + 1
        at_boundary = live_at(start_ts)
        peak = at_boundary
        lo = bisect.bisect_right(times, start_ts)
        hi = bisect.bisect_left(times, end_ts)
        for pt in timeline[lo:hi]:
            if pt.live_bytes > peak:
                peak = pt.live_bytes
        windows.append(IterationWindow(i, seq, start_ts, at_boundary, peak))
    peaks = {w.peak_bytes for w in windows}
    return StabilityReport(iterations=tuple(windows), stable=len(peaks) <= 1)
