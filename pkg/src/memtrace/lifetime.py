"""Lifetime analyses over a block index: access intervals, memory timeline,
peak usage, Gantt layout and fragmentation accounting."""

from __future__ import annotations

import heapq
import operator
from typing import Dict, List, NamedTuple, Optional, Tuple

from .trace import BlockRecord, trace_end_us

_ALLOC_KEY = operator.attrgetter("alloc_us")
_BAND_KEY = operator.itemgetter(1, 2)  # (y_offset, y_end) of an active entry
_END_KEY = operator.itemgetter(1)


class MixedAddressingError(Exception):
    """Some blocks carry device addresses and some do not."""


# NamedTuples: these are built in bulk for every block or timestamp of a
# trace, where tuple construction matters.
class AtiSeries(NamedTuple):
    block_id: int
    intervals_us: Tuple[int, ...]


class TimelinePoint(NamedTuple):
    timestamp_us: int
    live_bytes: int
    live_blocks: int


class GanttRow(NamedTuple):
    block_id: int
    start_us: int
    end_us: int
    size_bytes: int
    y_offset_bytes: int


def access_sequence(rec: BlockRecord, include_boundary_gaps: bool = False) -> Tuple[int, ...]:
    """Timestamps whose consecutive gaps define the block's access intervals.

    With include_boundary_gaps the alloc and (when present) free timestamps
    bracket the read/write accesses, adding the alloc->first-access and
    last-access->free gaps.
    """
    if not include_boundary_gaps:
        return rec.access_us
    seq = (rec.alloc_us,) + rec.access_us
    if rec.free_us is not None:
        seq = seq + (rec.free_us,)
    return seq


def compute_atis(
    index: Dict[int, BlockRecord], include_boundary_gaps: bool = False
) -> Dict[int, AtiSeries]:
    """Per-block access time intervals: consecutive differences of access timestamps.

    Blocks with fewer than two relevant timestamps yield an empty series.
    """
    out: Dict[int, AtiSeries] = {}
    if include_boundary_gaps:
        for bid, rec in index.items():
            ts = access_sequence(rec, True)
            out[bid] = AtiSeries(bid, tuple(b - a for a, b in zip(ts, ts[1:])))
    else:
        for bid, rec in index.items():
            ts = rec[5]  # access_us
            out[bid] = AtiSeries(bid, tuple(b - a for a, b in zip(ts, ts[1:])))
    return out


def memory_timeline(index: Dict[int, BlockRecord]) -> List[TimelinePoint]:
    """Live bytes/blocks at every distinct alloc/free timestamp.

    A block is live on [alloc_us, free_us): a Free at t excludes the block at t.
    Leaked blocks stay live through the final point.
    """
    # deltas: timestamp -> (byte delta, block delta); records unpacked
    # positionally for speed
    deltas: Dict[int, List[int]] = {}
    get = deltas.get
    for _, size, _, alloc_us, free_us, _, _ in index.values():
        d = get(alloc_us)
        if d is None:
            deltas[alloc_us] = [size, 1]
        else:
            d[0] += size
            d[1] += 1
        if free_us is not None:
            d = get(free_us)
            if d is None:
                deltas[free_us] = [-size, -1]
            else:
                d[0] -= size
                d[1] -= 1
    points: List[TimelinePoint] = []
    append = points.append
    live_b = 0
    live_n = 0
    for ts in sorted(deltas):
        db, dn = deltas[ts]
        live_b += db
        live_n += dn
        append(TimelinePoint(ts, live_b, live_n))
    return points


def peak_memory(index: Dict[int, BlockRecord]) -> Tuple[int, int]:
    """(peak live bytes, earliest timestamp at which it occurs); (0, 0) when empty."""
    peak = 0
    peak_ts = 0
    found = False
    for pt in memory_timeline(index):
        if not found or pt.live_bytes > peak:
            peak = pt.live_bytes
            peak_ts = pt.timestamp_us
            found = True
    return (peak, peak_ts) if found else (0, 0)


def _lifetime_interval(rec: BlockRecord, end_default: int) -> Tuple[int, int]:
    return rec.alloc_us, rec.free_us if rec.free_us is not None else end_default


def gantt_layout(index: Dict[int, BlockRecord]) -> List[GanttRow]:
    """Assign a vertical byte band to every block.

    When every block carries a device address, bands come straight from the
    addresses (offset relative to the lowest one).  Without addresses a
    first-fit packing in allocation order produces a synthetic layout; bands
    of time-overlapping blocks never intersect either way.
    """
    if not index:
        return []
    recs = list(index.values())
    with_addr = [r for r in recs if r.address is not None]
    if with_addr and len(with_addr) != len(recs):
        raise MixedAddressingError(
            f"{len(with_addr)} of {len(recs)} blocks carry addresses; need all or none"
        )
    end_default = trace_end_us(index)

    rows: List[GanttRow] = []
    if with_addr:
        base = min(r.address for r in recs)
        for r in recs:
            start, end = _lifetime_interval(r, end_default)
            rows.append(GanttRow(r.block_id, start, end, r.size_bytes, r.address - base))
        return rows

    # First-fit: process in allocation order; keep rows whose lifetime may
    # still overlap future blocks in a heap keyed by end time.
    ordered = sorted(recs, key=_ALLOC_KEY)  # stable: ties keep insertion order
    active: List[Tuple[int, int, int]] = []  # (end_us, y_offset, y_end)
    heappop, heappush = heapq.heappop, heapq.heappush
    for bid, size, _, start, free_us, _, _ in ordered:
        end = free_us if free_us is not None else end_default
        while active and active[0][0] <= start:
            heappop(active)
        offset = 0
        for _, y0, y1 in sorted(active, key=_BAND_KEY):
            if offset + size <= y0:
                break
            if y1 > offset:
                offset = y1
        rows.append(GanttRow(bid, start, end, size, offset))
        if end > start:
            heappush(active, (end, offset, offset + size))
    rows.sort()  # block_id first
    return rows


def fragmentation_timeline(
    rows: List[GanttRow], index: Dict[int, BlockRecord]
) -> List[Tuple[int, int]]:
    """Fragment bytes (band span minus live bytes) at each alloc/free timestamp.

    Zero whenever fewer than two blocks are live.
    """
    timestamps = set()
    for rec in index.values():
        timestamps.add(rec[3])  # alloc_us
        if rec[4] is not None:  # free_us
            timestamps.add(rec[4])
    if not timestamps:
        return []

    # zero-width rows never contribute; drop them up front
    spans = [(r[1], r[2], r[3], r[4]) for r in rows if r[2] > r[1]]
    starts = sorted(spans)  # by start_us
    ends = sorted(spans, key=_END_KEY)
    n_spans = len(spans)
    si = ei = 0
    live = 0
    live_bytes = 0
    # Lazy-deletion heaps for min y_offset and max y_end over live rows.
    lo_heap: List[int] = []
    hi_heap: List[int] = []  # negated y_end
    removed_lo: Dict[int, int] = {}
    removed_hi: Dict[int, int] = {}
    heappop, heappush = heapq.heappop, heapq.heappush

    out: List[Tuple[int, int]] = []
    append = out.append
    for ts in sorted(timestamps):
        # retire rows ending at or before ts (live interval is [start, end))
        while ei < n_spans and ends[ei][1] <= ts:
            _, _, size, y0 = ends[ei]
            ei += 1
            live -= 1
            live_bytes -= size
            removed_lo[y0] = removed_lo.get(y0, 0) + 1
            y1 = y0 + size
            removed_hi[y1] = removed_hi.get(y1, 0) + 1
        # admit rows starting at or before ts
        while si < n_spans and starts[si][0] <= ts:
            _, end, size, y0 = starts[si]
            si += 1
            if end <= ts:
                continue  # already over before this sweep point
            live += 1
            live_bytes += size
            heappush(lo_heap, y0)
            heappush(hi_heap, -(y0 + size))
        if live < 2:
            append((ts, 0))
            continue
        while lo_heap and removed_lo.get(lo_heap[0], 0) > 0:
            removed_lo[lo_heap[0]] -= 1
            heappop(lo_heap)
        while hi_heap and removed_hi.get(-hi_heap[0], 0) > 0:
            removed_hi[-hi_heap[0]] -= 1
            heappop(hi_heap)
        span = -hi_heap[0] - lo_heap[0]
        append((ts, span - live_bytes))
    return out
