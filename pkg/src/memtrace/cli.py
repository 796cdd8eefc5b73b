"""Command-line front end.

Subcommands: generate, analyze, ati, gantt, cdf, iterations, swap-plan,
breakdown.  Exit codes: 0 success, 1 usage error, 2 input/validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .breakdown import sweep_report
from .lifetime import compute_atis, gantt_layout
from .patterns import NoPeriodFoundError, detect_trace_iterations, iteration_stability
from .report import build_report
from .stats import ecdf
from .swap import (
    DEFAULT_BANDWIDTHS,
    BandwidthConfig,
    find_candidates,
    load_bandwidth_config,
    rank_candidates,
)
from .synthgen import ConfigError, MlpConfig, generate_mlp, plant_outlier, write_manifest
from .trace import TraceError, build_block_index, parse_trace, write_trace


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_bw_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bw-d2h", type=float, default=None,
                   help="device-to-host bandwidth, bytes/s (default 6.4e9)")
    p.add_argument("--bw-h2d", type=float, default=None,
                   help="host-to-device bandwidth, bytes/s (default 6.3e9)")
    p.add_argument("--config", type=Path, default=None,
                   help="key=value file with b_d2h_bytes_per_s / b_h2d_bytes_per_s")


def _add_common(p: argparse.ArgumentParser, fmt: bool = True) -> None:
    if fmt:
        p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    p.add_argument("--include-boundary-gaps", action="store_true",
                   help="count alloc->first-access and last-access->free gaps as intervals")


def _build_parser() -> _Parser:
    parser = _Parser(prog="memtrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a synthetic MLP training trace + manifest")
    g.add_argument("--d-in", type=int, default=2)
    g.add_argument("--d-hidden", type=int, default=12288)
    g.add_argument("--d-out", type=int, default=2)
    g.add_argument("--batch", type=int, default=512)
    g.add_argument("--iterations", type=int, default=5)
    g.add_argument("--element-bytes", type=int, default=4)
    g.add_argument("--bytes-per-us", type=int, default=10_000)
    g.add_argument("--outlier-size-bytes", type=int, default=None,
                   help="plant a long-idle block of this size")
    g.add_argument("--outlier-idle-us", type=int, default=None,
                   help="idle gap of the planted block (requires --outlier-size-bytes)")
    g.add_argument("--out", type=Path, required=True, help="trace output path")

    a = sub.add_parser("analyze", help="run every analysis and write a report bundle")
    a.add_argument("trace", type=Path)
    a.add_argument("--out", type=Path, required=True, help="report directory")
    a.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    _add_bw_flags(a)
    _add_common(a)

    for name, help_text in (
        ("ati", "per-block access time intervals"),
        ("gantt", "lifetime layout table"),
        ("cdf", "empirical CDF of the pooled ATI population"),
        ("iterations", "iterative-structure report"),
        ("swap-plan", "ranked swap candidates"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("trace", type=Path)
        p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
        if name == "swap-plan":
            _add_bw_flags(p)
        if name != "iterations":
            _add_common(p, fmt=True)

    b = sub.add_parser("breakdown", help="per-class breakdown at peak (multi-trace sweep)")
    b.add_argument("traces", type=Path, nargs="+")
    b.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    b.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    return parser


def _bandwidths(args) -> BandwidthConfig:
    bw = DEFAULT_BANDWIDTHS
    if args.config is not None:
        bw = load_bandwidth_config(args.config)
    d2h = args.bw_d2h if args.bw_d2h is not None else bw.b_d2h
    h2d = args.bw_h2d if args.bw_h2d is not None else bw.b_h2d
    return BandwidthConfig(b_d2h=d2h, b_h2d=h2d)


def _load_trace(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    with open(path, "rb") as fh:
        return parse_trace(fh)


def _emit_table(header: Sequence[str], rows: Sequence[Sequence], fmt: str,
                out: Optional[Path]) -> None:
    lines: List[str] = []
    if fmt == "csv":
        lines.append(",".join(header))
        lines.extend(",".join(str(v) for v in row) for row in rows)
    else:
        lines.extend(json.dumps(dict(zip(header, row))) for row in rows)
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _emit_text(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _cmd_generate(args) -> int:
    config = MlpConfig(
        d_in=args.d_in, d_hidden=args.d_hidden, d_out=args.d_out,
        batch=args.batch, iterations=args.iterations,
        element_bytes=args.element_bytes, bytes_per_us=args.bytes_per_us,
    )
    if (args.outlier_size_bytes is None) != (args.outlier_idle_us is None):
        raise _UsageError("--outlier-size-bytes and --outlier-idle-us go together")
    if args.outlier_size_bytes is not None:
        trace, manifest = plant_outlier(config, args.outlier_size_bytes, args.outlier_idle_us)
    else:
        trace, manifest = generate_mlp(config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(write_trace(trace))
    with open(args.out.with_suffix(".manifest"), "w", encoding="utf-8") as fh:
        write_manifest(manifest, fh)
    print(f"wrote {args.out} ({manifest.total_events} events) and sidecar manifest")
    return 0


def _cmd_analyze(args) -> int:
    trace = _load_trace(args.trace)
    bundle = build_report(
        trace,
        args.out,
        bw=_bandwidths(args),
        fmt=args.format,
        include_boundary_gaps=args.include_boundary_gaps,
        render_figures=not args.no_plots,
        trace_label=args.trace.name,
    )
    print(f"wrote {len(bundle.files)} report files to {bundle.out_dir}")
    return 0


def _cmd_ati(args) -> int:
    index = build_block_index(_load_trace(args.trace))
    atis = compute_atis(index, args.include_boundary_gaps)
    rows = [(bid, i, v) for bid, s in atis.items() for i, v in enumerate(s.intervals_us)]
    _emit_table(("block_id", "interval_index", "interval_us"), rows, args.format, args.out)
    return 0


def _cmd_gantt(args) -> int:
    index = build_block_index(_load_trace(args.trace))
    rows = gantt_layout(index)
    _emit_table(
        ("block_id", "start_us", "end_us", "size_bytes", "y_offset_bytes", "class", "leaked"),
        [(r.block_id, r.start_us, r.end_us, r.size_bytes, r.y_offset_bytes,
          index[r.block_id].block_class.value, int(index[r.block_id].leaked))
         for r in rows],
        args.format, args.out,
    )
    return 0


def _cmd_cdf(args) -> int:
    index = build_block_index(_load_trace(args.trace))
    atis = compute_atis(index, args.include_boundary_gaps)
    population = [v for s in atis.values() for v in s.intervals_us]
    points = ecdf(population) if population else []
    _emit_table(("interval_us", "cumulative_fraction"), points, args.format, args.out)
    return 0


def _cmd_iterations(args) -> int:
    trace = _load_trace(args.trace)
    try:
        structure = detect_trace_iterations(trace)
    except NoPeriodFoundError:
        _emit_text("no_period_found=true\n", args.out)
        return 0
    stability = iteration_stability(structure, trace)
    lines = [
        "no_period_found=false",
        f"warmup_len={structure.warmup_len}",
        f"period_len={structure.period_len}",
        f"iteration_count={structure.iteration_count}",
        "boundaries=" + " ".join(str(b) for b in structure.boundaries),
        f"stable={'true' if stability.stable else 'false'}",
    ]
    for w in stability.iterations:
        lines.append(
            f"iteration.{w.index}: boundary_seq={w.boundary_seq} boundary_us={w.boundary_us} "
            f"live_bytes={w.live_bytes_at_boundary} peak_bytes={w.peak_bytes}"
        )
    _emit_text("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_swap_plan(args) -> int:
    index = build_block_index(_load_trace(args.trace))
    atis = compute_atis(index, args.include_boundary_gaps)
    plan = rank_candidates(find_candidates(
        index, atis, _bandwidths(args),
        include_boundary_gaps=args.include_boundary_gaps,
    ))
    rows = [
        (i, c.block_id, c.size_bytes, c.gap_us, f"{float(c.max_swap_bytes) / 1000:.2f}",
         int(c.feasible), c.margin_bytes, int(c.overlaps_peak))
        for i, c in enumerate(plan.candidates)
    ]
    _emit_table(
        ("rank", "block_id", "size_bytes", "gap_us", "max_swap_kb",
         "feasible", "margin_bytes", "overlaps_peak"),
        rows, args.format, args.out,
    )
    if args.out is not None:
        print(f"estimated_savings_bytes={plan.estimated_savings_bytes}")
    else:
        sys.stdout.write(f"# estimated_savings_bytes={plan.estimated_savings_bytes}\n")
    return 0


def _cmd_breakdown(args) -> int:
    traces = [(p.name, _load_trace(p)) for p in args.traces]
    rows = sweep_report(traces)
    from .trace import CLASS_ORDER

    header = (["label"]
              + [f"{cls.value}_bytes" for cls in CLASS_ORDER]
              + [f"{cls.value}_share" for cls in CLASS_ORDER])
    table = [
        [r.label]
        + [r.bytes_per_class.get(cls, 0) for cls in CLASS_ORDER]
        + [f"{r.share_per_class.get(cls, 0.0):.6f}" for cls in CLASS_ORDER]
        for r in rows
    ]
    _emit_table(header, table, args.format, args.out)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "analyze": _cmd_analyze,
    "ati": _cmd_ati,
    "gantt": _cmd_gantt,
    "cdf": _cmd_cdf,
    "iterations": _cmd_iterations,
    "swap-plan": _cmd_swap_plan,
    "breakdown": _cmd_breakdown,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TraceError, ConfigError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
