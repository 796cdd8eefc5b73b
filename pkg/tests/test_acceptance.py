"""Acceptance suite: one test per release criterion, each printing a single
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s`` to see them)."""

import contextlib
import math
import random
import time
from fractions import Fraction

from memtrace.breakdown import breakdown_at_peak
from memtrace.cli import run
from memtrace.lifetime import compute_atis, memory_timeline, peak_memory
from memtrace.patterns import detect_trace_iterations
from memtrace.stats import percentile
from memtrace.swap import DEFAULT_BANDWIDTHS, find_candidates, max_swap_size, rank_candidates
from memtrace.synthgen import MlpConfig, generate_mlp, plant_outlier, read_manifest
from memtrace.trace import CLASS_ORDER, BlockClass, BlockRecord, build_block_index

from conftest import make_random_trace


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"FAIL {name}", flush=True)
        raise
    print(f"PASS {name}", flush=True)


def test_round_trip_swap_bounds():
    with criterion("round-trip swap bounds (25us -> 79.37KB, 0.8s -> 2.54GB)"):
        kb = float(max_swap_size(25, DEFAULT_BANDWIDTHS)) / 1e3
        assert abs(kb - 79.37) <= 0.01
        gb = float(max_swap_size(800_000, DEFAULT_BANDWIDTHS)) / 1e9
        assert abs(gb - 2.54) <= 0.01


def test_outlier_classification_and_ranking():
    with criterion("outlier block feasible and ranked first; short-gap block infeasible"):
        trace, manifest = plant_outlier(
            MlpConfig(d_hidden=32, batch=4, iterations=3),
            size_bytes=1_200_000_000, idle_us=840_211,
        )
        index = build_block_index(trace)
        plan = rank_candidates(
            find_candidates(index, compute_atis(index), DEFAULT_BANDWIDTHS)
        )
        outlier = next(c for c in plan.candidates
                       if c.block_id == manifest.outlier_block_id)
        assert outlier.feasible
        assert plan.candidates[0].block_id == manifest.outlier_block_id

        # a 100 KB block whose only gap is 25us cannot hide a round trip
        small_index = {
            1: BlockRecord(1, 100_000, BlockClass.UNKNOWN, 0, 100, (10, 35), None)
        }
        small = find_candidates(small_index, compute_atis(small_index),
                                DEFAULT_BANDWIDTHS)
        assert small[0].gap_us == 25
        assert not small[0].feasible


def test_iteration_structure_matches_generator():
    with criterion("iteration period/count match generator for 2, 5, 10 iterations"):
        for iterations in (2, 5, 10):
            trace, manifest = generate_mlp(
                MlpConfig(d_hidden=16, batch=4, iterations=iterations)
            )
            start = time.perf_counter()
            structure = detect_trace_iterations(trace)
            elapsed = time.perf_counter() - start
            assert structure.period_len == manifest.events_per_iteration
            assert structure.iteration_count == iterations
            assert elapsed < 1.0, f"{elapsed:.3f}s for {iterations} iterations"


def test_manifest_equivalence_sweep():
    with criterion("peak/breakdown/ATI counts equal generator manifest on 20 configs"):
        rng = random.Random(1234)
        for _ in range(20):
            config = MlpConfig(
                d_in=rng.randint(1, 8),
                d_hidden=rng.randint(4, 64),
                d_out=rng.randint(1, 8),
                batch=rng.randint(1, 32),
                iterations=rng.randint(1, 6),
                element_bytes=rng.choice((2, 4, 8)),
            )
            trace, manifest = generate_mlp(config)
            index = build_block_index(trace)
            assert peak_memory(index) == (manifest.peak_bytes,
                                          manifest.peak_timestamp_us)
            report = breakdown_at_peak(index)
            for cls in CLASS_ORDER:
                assert report.bytes_per_class.get(cls, 0) == \
                    manifest.class_bytes_at_peak.get(cls, 0)
            for bid, series in compute_atis(index).items():
                assert len(series.intervals_us) == \
                    max(0, manifest.access_counts[bid] - 1)


def _brute_force_timeline(index):
    stamps = set()
    for rec in index.values():
        stamps.add(rec.alloc_us)
        if rec.free_us is not None:
            stamps.add(rec.free_us)
    out = []
    for t in sorted(stamps):
        live = [rec for rec in index.values()
                if rec.alloc_us <= t and (rec.free_us is None or t < rec.free_us)]
        out.append((t, sum(rec.size_bytes for rec in live), len(live)))
    return out


def _brute_force_percentile(values, frac):
    rank = math.ceil(frac * len(values))
    return min(v for v in values
               if sum(1 for u in values if u <= v) >= rank)


def test_brute_force_oracles():
    with criterion("timeline and percentile match O(n^2) references on 100 inputs"):
        rng = random.Random(99)
        for _ in range(100):
            index = build_block_index(make_random_trace(rng, max_blocks=40))
            got = [(p.timestamp_us, p.live_bytes, p.live_blocks)
                   for p in memory_timeline(index)]
            assert got == _brute_force_timeline(index)
        for _ in range(100):
            values = [rng.randint(0, 10**6) for _ in range(rng.randint(1, 1000))]
            frac = Fraction(rng.randint(1, 100), 100)
            assert percentile(values, frac) == _brute_force_percentile(values, frac)


def test_breakdown_trends_across_batch_sizes():
    with criterion("parameter share falls, intermediate share rises with batch size; "
                   "parameter bytes constant at 245768"):
        param_shares = []
        inter_shares = []
        for batch in (1, 64, 512, 4096):
            trace, _ = generate_mlp(MlpConfig(batch=batch, iterations=2))
            report = breakdown_at_peak(build_block_index(trace))
            assert report.bytes_per_class.get(BlockClass.PARAMETER, 0) == 245_768
            param_shares.append(report.share_per_class.get(BlockClass.PARAMETER, 0.0))
            inter_shares.append(report.share_per_class.get(BlockClass.INTERMEDIATE, 0.0))
        assert all(a > b for a, b in zip(param_shares, param_shares[1:]))
        assert all(a <= b for a, b in zip(inter_shares, inter_shares[1:]))


def test_reports_are_deterministic(tmp_path):
    with criterion("generate + analyze twice gives byte-identical bundles"):
        outputs = []
        for tag in ("first", "second"):
            trace = tmp_path / tag / "run.memtrace"
            out = tmp_path / tag / "report"
            assert run(["generate", "--d-hidden", "16", "--batch", "4",
                        "--iterations", "3", "--out", str(trace)]) == 0
            assert run(["analyze", str(trace), "--out", str(out)]) == 0
            outputs.append(out)
        first, second = outputs
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_scale_million_event_analyze(tmp_path):
    with criterion("analyze of a million-event trace finishes in under 10 seconds"):
        trace = tmp_path / "big.memtrace"
        assert run(["generate", "--d-hidden", "8", "--batch", "2",
                    "--iterations", "15874", "--out", str(trace)]) == 0
        with open(trace.with_suffix(".manifest")) as fh:
            manifest = read_manifest(fh)
        assert manifest.total_events >= 1_000_000
        start = time.perf_counter()
        code = run(["analyze", str(trace), "--out", str(tmp_path / "report")])
        elapsed = time.perf_counter() - start
        assert code == 0
        assert elapsed < 10.0, f"analyze took {elapsed:.2f}s"
