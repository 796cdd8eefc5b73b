"""Content-class memory breakdown: who owns the footprint at a given instant."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .lifetime import peak_memory
from .trace import CLASS_ORDER, BlockClass, BlockRecord, Trace, build_block_index


class NoLiveBlocksError(Exception):
    """No block is live at the requested timestamp."""


@dataclass(frozen=True, slots=True)
class BreakdownReport:
    at_timestamp_us: int
    bytes_per_class: Dict[BlockClass, int]
    share_per_class: Dict[BlockClass, float]
    total_bytes: int


def breakdown_at(index: Dict[int, BlockRecord], timestamp_us: int) -> BreakdownReport:
    """Bytes and shares per content class over blocks live at the timestamp.

    A block is live on [alloc_us, free_us); leaked blocks stay live.
    """
    per_class = {cls: 0 for cls in CLASS_ORDER}
    total = 0
    for rec in index.values():
        if rec.alloc_us <= timestamp_us and (rec.free_us is None or timestamp_us < rec.free_us):
            per_class[rec.block_class] += rec.size_bytes
            total += rec.size_bytes
    if total == 0:
        raise NoLiveBlocksError(f"no live blocks at t={timestamp_us}us")
    shares = {cls: per_class[cls] / total for cls in CLASS_ORDER}
    return BreakdownReport(
        at_timestamp_us=timestamp_us,
        bytes_per_class=per_class,
        share_per_class=shares,
        total_bytes=total,
    )


def breakdown_at_peak(index: Dict[int, BlockRecord]) -> BreakdownReport:
    _, peak_ts = peak_memory(index)
    return breakdown_at(index, peak_ts)


@dataclass(frozen=True, slots=True)
class SweepRow:
    label: str
    bytes_per_class: Dict[BlockClass, int]
    share_per_class: Dict[BlockClass, float]
    total_bytes: int
    peak_timestamp_us: int


def sweep_report(traces: Sequence[Tuple[str, Trace]]) -> List[SweepRow]:
    """Breakdown at each trace's own peak, one row per trace in input order."""
    rows: List[SweepRow] = []
    for label, trace in traces:
        try:
            index = build_block_index(trace)
            report = breakdown_at_peak(index)
        except Exception as exc:
            raise type(exc)(f"trace {label!r}: {exc}") from exc
        rows.append(
            SweepRow(
                label=label,
                bytes_per_class=report.bytes_per_class,
                share_per_class=report.share_per_class,
                total_bytes=report.total_bytes,
                peak_timestamp_us=report.at_timestamp_us,
            )
        )
    return rows
