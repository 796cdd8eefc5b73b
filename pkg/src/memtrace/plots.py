"""Figure rendering for report bundles.  Figures are a convenience view of the
delimited tables; every number they show is also in a table."""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.collections import PolyCollection

from .breakdown import BreakdownReport
from .lifetime import GanttRow, TimelinePoint
from .stats import DistributionSummary
from .trace import CLASS_ORDER

# Keep PNG output byte-deterministic: fixed metadata, no timestamps.
_SAVE_KW = dict(dpi=100, metadata={"Software": "memtrace"})

# Rendering caps keep figures fast on very large traces; the tables stay complete.
MAX_GANTT_ROWS = 2000
MAX_SERIES_POINTS = 5000

_CLASS_COLORS = {
    "IN": "#4c72b0",
    "PARAM": "#dd8452",
    "INTER": "#55a868",
    "OTHER": "#c44e52",
    "UNK": "#8172b3",
}


def _decimate(seq: Sequence, limit: int) -> List:
    if len(seq) <= limit:
        return list(seq)
    step = (len(seq) + limit - 1) // limit
    return list(seq[::step])


def render_gantt(rows: Sequence[GanttRow], classes: Dict[int, str], path) -> None:
    fig, ax = plt.subplots(figsize=(10, 5))
    shown = sorted(rows, key=lambda r: r.start_us)[:MAX_GANTT_ROWS]
    # one collection for all rectangles; per-row axes calls are too slow
    verts = []
    colors = []
    for r in shown:
        x0, x1 = r.start_us, max(r.start_us + 1, r.end_us)
        y0, y1 = r.y_offset_bytes, r.y_offset_bytes + r.size_bytes
        verts.append(((x0, y0), (x0, y1), (x1, y1), (x1, y0)))
        colors.append(_CLASS_COLORS.get(classes.get(r.block_id, "UNK"), "#8172b3"))
    if verts:
        ax.add_collection(
            PolyCollection(verts, facecolors=colors, edgecolors="none")
        )
        ax.autoscale_view()
    ax.set_xlabel("time (us)")
    ax.set_ylabel("memory offset (bytes)")
    title = "block lifetimes"
    if len(rows) > len(shown):
        title += f" (first {len(shown)} of {len(rows)} blocks)"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_timeline(points: Sequence[TimelinePoint], path) -> None:
    fig, ax = plt.subplots(figsize=(10, 4))
    shown = _decimate(points, MAX_SERIES_POINTS)
    ax.step(
        [p.timestamp_us for p in shown],
        [p.live_bytes for p in shown],
        where="post",
    )
    ax.set_xlabel("time (us)")
    ax.set_ylabel("live bytes")
    ax.set_title("memory footprint over time")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_cdf(points: Sequence[Tuple[int, float]], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    shown = _decimate(points, MAX_SERIES_POINTS)
    ax.step([v for v, _ in shown], [f for _, f in shown], where="post")
    ax.set_xlabel("access time interval (us)")
    ax.set_ylabel("cumulative fraction")
    ax.set_xscale("symlog")
    ax.set_ylim(0, 1.02)
    ax.set_title("ATI empirical CDF")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_ati_distribution(summary: DistributionSummary, path) -> None:
    fig, (ax_h, ax_b) = plt.subplots(
        2, 1, figsize=(6, 5), sharex=True, height_ratios=[3, 1]
    )
    centers = [(lo + hi) / 2 for lo, hi, _ in summary.histogram]
    widths = [max(hi - lo, 0.8) for lo, hi, _ in summary.histogram]
    ax_h.bar(centers, [c for _, _, c in summary.histogram], width=widths,
             color="#55a868", edgecolor="none")
    ax_h.set_ylabel("count")
    ax_h.set_title("ATI distribution")
    ax_b.boxplot(
        [[summary.min_us, summary.q1_us, summary.median_us, summary.q3_us, summary.max_us]],
        orientation="horizontal", widths=0.6,
    )
    ax_b.set_yticks([])
    ax_b.set_xlabel("access time interval (us)")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_breakdown(report: BreakdownReport, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [cls.value for cls in CLASS_ORDER]
    values = [report.bytes_per_class.get(cls, 0) for cls in CLASS_ORDER]
    ax.bar(labels, values, color=[_CLASS_COLORS[l] for l in labels])
    ax.set_ylabel("bytes at peak")
    ax.set_title(f"footprint breakdown at t={report.at_timestamp_us}us")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
