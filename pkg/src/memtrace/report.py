"""Report bundle assembly: runs every analysis over a trace and writes the
delimited tables, the plain-text summary and (optionally) figures."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import plots
from .breakdown import NoLiveBlocksError, breakdown_at
from .lifetime import (
    compute_atis,
    fragmentation_timeline,
    gantt_layout,
    memory_timeline,
)
from .patterns import NoPeriodFoundError, detect_trace_iterations, iteration_stability
from .stats import ecdf, summarize
from .swap import BandwidthConfig, find_candidates, rank_candidates
from .trace import CLASS_ORDER, Trace, build_block_index


@dataclass
class ReportBundle:
    out_dir: Path
    files: List[Tuple[str, int]]  # (filename, row count; -1 for figures)


class _TableWriter:
    def __init__(self, out_dir: Path, fmt: str):
        if fmt not in ("csv", "json-lines"):
            raise ValueError(f"unknown format {fmt!r}")
        self.out_dir = out_dir
        self.fmt = fmt
        self.ext = "csv" if fmt == "csv" else "jsonl"

    def write(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> Tuple[str, int]:
        filename = f"{name}.{self.ext}"
        path = self.out_dir / filename
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if self.fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            else:
                for row in rows:
                    fh.write(json.dumps(dict(zip(header, row)), sort_keys=False) + "\n")
        return filename, len(rows)


def _fmt_frac(x: Fraction, digits: int = 2) -> str:
    return f"{float(x):.{digits}f}"


def build_report(
    trace: Trace,
    out_dir: Path,
    bw: BandwidthConfig,
    fmt: str = "csv",
    include_boundary_gaps: bool = False,
    render_figures: bool = True,
    trace_label: str = "trace",
) -> ReportBundle:
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = _TableWriter(out_dir, fmt)
    files: List[Tuple[str, int]] = []
    notes: List[str] = []

    index = build_block_index(trace)
    classes = {bid: rec.block_class.value for bid, rec in index.items()}

    # timeline + peak
    timeline = memory_timeline(index)
    files.append(writer.write(
        "timeline", ("timestamp_us", "live_bytes", "live_blocks"), timeline,
    ))
    peak_bytes, peak_ts = 0, 0
    for p in timeline:
        if p.live_bytes > peak_bytes:
            peak_bytes, peak_ts = p.live_bytes, p.timestamp_us
    leaked = sorted(bid for bid, rec in index.items() if rec.leaked)

    # gantt + fragmentation
    rows = gantt_layout(index)
    synthetic = any(rec.address is None for rec in index.values())
    files.append(writer.write(
        "gantt",
        ("block_id", "start_us", "end_us", "size_bytes", "y_offset_bytes", "class", "leaked"),
        # GanttRow's field order matches the table's first five columns
        [r + (classes[r[0]], int(index[r[0]].free_us is None)) for r in rows],
    ))
    frag = fragmentation_timeline(rows, index)
    files.append(writer.write(
        "fragmentation", ("timestamp_us", "fragment_bytes"), frag,
    ))

    # ATIs
    atis = compute_atis(index, include_boundary_gaps)
    files.append(writer.write(
        "ati",
        ("block_id", "interval_index", "interval_us"),
        [(bid, i, v)
         for bid, series in atis.items()
         for i, v in enumerate(series.intervals_us)],
    ))
    population = [v for series in atis.values() for v in series.intervals_us]
    if population:
        cdf_points = ecdf(population)
        files.append(writer.write(
            "ati_cdf", ("interval_us", "cumulative_fraction"), cdf_points,
        ))
        summary = summarize(population)
        files.append(writer.write(
            "ati_summary",
            ("count", "min_us", "q1_us", "median_us", "q3_us", "max_us", "mean_us"),
            [(summary.count, summary.min_us, summary.q1_us, summary.median_us,
              summary.q3_us, summary.max_us, _fmt_frac(summary.mean_us, 3))],
        ))
        files.append(writer.write(
            "ati_histogram", ("bin_lo_us", "bin_hi_us", "count"),
            [(f"{lo:.3f}", f"{hi:.3f}", c) for lo, hi, c in summary.histogram],
        ))
    else:
        cdf_points = None
        summary = None
        notes.append("no access intervals: trace has no block with two or more accesses")

    # iteration structure
    try:
        structure = detect_trace_iterations(trace)
        stability = iteration_stability(structure, trace, index=index, timeline=timeline)
    except NoPeriodFoundError:
        structure = None
        stability = None
    iter_lines: List[str] = []
    if structure is None:
        iter_lines.append("no_period_found=true")
    else:
        iter_lines.append("no_period_found=false")
        iter_lines.append(f"warmup_len={structure.warmup_len}")
        iter_lines.append(f"period_len={structure.period_len}")
        iter_lines.append(f"iteration_count={structure.iteration_count}")
        iter_lines.append("boundaries=" + " ".join(str(b) for b in structure.boundaries))
        iter_lines.append(f"stable={'true' if stability.stable else 'false'}")
        for w in stability.iterations:
            iter_lines.append(
                f"iteration.{w.index}: boundary_seq={w.boundary_seq} "
                f"boundary_us={w.boundary_us} live_bytes={w.live_bytes_at_boundary} "
                f"peak_bytes={w.peak_bytes}"
            )
    with open(out_dir / "iterations.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(iter_lines) + "\n")
    files.append(("iterations.txt", len(iter_lines)))

    # swap plan
    candidates = find_candidates(index, atis, bw,
                                 peak_window=(peak_ts, peak_ts),
                                 include_boundary_gaps=include_boundary_gaps)
    plan = rank_candidates(candidates)
    files.append(writer.write(
        "swap_candidates",
        ("rank", "block_id", "size_bytes", "gap_us", "gap_start_us", "gap_end_us",
         "max_swap_kb", "feasible", "margin_bytes", "overlaps_peak"),
        # SwapCandidate's field order matches columns 1-5 of the table
        [(i,) + c[:5] + (f"{float(c.max_swap_bytes) / 1000:.2f}", int(c.feasible),
                         c.margin_bytes, int(c.overlaps_peak))
         for i, c in enumerate(plan.candidates)],
    ))

    # breakdown at peak
    try:
        bd = breakdown_at(index, peak_ts)
    except NoLiveBlocksError:
        bd = None
        notes.append("no live blocks at peak timestamp")
    header = ["label"]
    header += [f"{cls.value}_bytes" for cls in CLASS_ORDER]
    header += [f"{cls.value}_share" for cls in CLASS_ORDER]
    bd_rows = []
    if bd is not None:
        bd_rows.append(
            [trace_label]
            + [bd.bytes_per_class.get(cls, 0) for cls in CLASS_ORDER]
            + [f"{bd.share_per_class.get(cls, 0.0):.6f}" for cls in CLASS_ORDER]
        )
    files.append(writer.write("breakdown", header, bd_rows))

    if render_figures:
        plots.render_gantt(rows, classes, out_dir / "gantt.png")
        files.append(("gantt.png", -1))
        plots.render_timeline(timeline, out_dir / "timeline.png")
        files.append(("timeline.png", -1))
        if cdf_points:
            plots.render_cdf(cdf_points, out_dir / "ati_cdf.png")
            files.append(("ati_cdf.png", -1))
            plots.render_ati_distribution(summary, out_dir / "ati_distribution.png")
            files.append(("ati_distribution.png", -1))
        if bd is not None:
            plots.render_breakdown(bd, out_dir / "breakdown.png")
            files.append(("breakdown.png", -1))

    # summary (written last so it can list every emitted file)
    lines = [
        f"trace={trace_label}",
        f"events={len(trace.events)}",
        f"blocks={len(index)}",
        f"leaked_blocks={len(leaked)}",
        f"peak_bytes={peak_bytes}",
        f"peak_timestamp_us={peak_ts}",
        f"gantt_layout={'synthetic (first-fit)' if synthetic else 'device addresses'}",
        f"swap_candidates={len(plan.candidates)}",
        f"estimated_savings_bytes={plan.estimated_savings_bytes}",
    ]
    if leaked:
        lines.append("leaked_block_ids=" + " ".join(str(b) for b in leaked[:50]))
    for note in notes:
        lines.append(f"note={note}")
    for filename, nrows in files:
        lines.append(f"file={filename} rows={'figure' if nrows < 0 else nrows}")
    lines.append("file=summary.txt rows=self")
    with open(out_dir / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    files.append(("summary.txt", len(lines)))

    return ReportBundle(out_dir=out_dir, files=files)
