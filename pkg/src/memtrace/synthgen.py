"""Deterministic synthetic trace generator for a small MLP training loop.

Emits the allocator/access events of `iterations` identical training steps
(forward mat_mul -> add_bias -> ReLU -> mat_mul -> add_bias, then backward and
an SGD update) together with a ground-truth manifest used as a testing oracle.
The default layer shapes are W0 (d_in, d_hidden), b0 (d_hidden),
W1 (d_hidden, d_out), b1 (d_out).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, List, Optional, TextIO, Tuple

from .trace import CLASS_ORDER, BlockClass, EventKind, MemoryEvent, Trace


class ConfigError(ValueError):
    """Non-positive generator parameter."""


@dataclass(frozen=True, slots=True)
class MlpConfig:
    d_in: int = 2
    d_hidden: int = 12288
    d_out: int = 2
    batch: int = 512
    iterations: int = 5
    element_bytes: int = 4
    bytes_per_us: int = 10_000  # linear time model: an access takes size/bytes_per_us

    def validate(self) -> None:
        for name in ("d_in", "d_hidden", "d_out", "batch", "iterations",
                     "element_bytes", "bytes_per_us"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def parameter_bytes(self) -> int:
        e = self.element_bytes
        return (self.d_in * self.d_hidden + self.d_hidden
                + self.d_hidden * self.d_out + self.d_out) * e


@dataclass
class Manifest:
    iterations: int
    warmup_events: int
    events_per_iteration: int
    total_events: int
    parameter_bytes: int
    peak_bytes: int
    peak_timestamp_us: int
    class_bytes_at_peak: Dict[BlockClass, int]
    access_counts: Dict[int, int]
    block_sizes: Dict[int, int] = field(default_factory=dict)
    block_classes: Dict[int, BlockClass] = field(default_factory=dict)
    outlier_block_id: Optional[int] = None


class _Emitter:
    """Builds the event stream while tracking ground truth on the fly."""

    def __init__(self, bytes_per_us: int):
        self.bytes_per_us = bytes_per_us
        self.events: List[MemoryEvent] = []
        self.clock = 0
        self.next_block = 0
        self.sizes: Dict[int, int] = {}
        self.classes: Dict[int, BlockClass] = {}
        self.access_counts: Dict[int, int] = {}
        self.live = 0
        self.live_per_class = {cls: 0 for cls in CLASS_ORDER}
        self.peak = 0
        self.peak_ts = 0
        self.peak_classes = dict(self.live_per_class)
        self.hint: Optional[int] = None

    def _emit(self, kind: EventKind, bid: int, advance: int) -> None:
        self.events.append(
            MemoryEvent(
                seq=len(self.events),
                timestamp_us=self.clock,
                kind=kind,
                block_id=bid,
                size_bytes=self.sizes[bid],
                block_class=self.classes[bid],
                iteration_hint=self.hint,
            )
        )
        self.clock += advance

    def alloc(self, size: int, cls: BlockClass) -> int:
        bid = self.next_block
        self.next_block += 1
        self.sizes[bid] = size
        self.classes[bid] = cls
        self.access_counts[bid] = 0
        self._emit(EventKind.ALLOC, bid, 1)
        self.live += size
        self.live_per_class[cls] += size
        if self.live > self.peak:
            self.peak = self.live
            self.peak_ts = self.events[-1].timestamp_us
            self.peak_classes = dict(self.live_per_class)
        return bid

    def access(self, bid: int, kind: EventKind) -> None:
        cost = max(1, math.ceil(self.sizes[bid] / self.bytes_per_us))
        self.access_counts[bid] += 1
        self._emit(kind, bid, cost)

    def read(self, *bids: int) -> None:
        for bid in bids:
            self.access(bid, EventKind.READ)

    def write(self, bid: int) -> None:
        self.access(bid, EventKind.WRITE)

    def free(self, *bids: int) -> None:
        for bid in bids:
            self._emit(EventKind.FREE, bid, 1)
            self.live -= self.sizes[bid]
            self.live_per_class[self.classes[bid]] -= self.sizes[bid]


def generate_mlp(config: MlpConfig = MlpConfig()) -> Tuple[Trace, Manifest]:
    """Emit the training trace and its manifest; identical configs give
    byte-identical traces."""
    config.validate()
    e = config.element_bytes
    in_b = config.batch * config.d_in * e
    hid_b = config.batch * config.d_hidden * e
    out_b = config.batch * config.d_out * e
    w0_b = config.d_in * config.d_hidden * e
    b0_b = config.d_hidden * e
    w1_b = config.d_hidden * config.d_out * e
    b1_b = config.d_out * e

    em = _Emitter(config.bytes_per_us)

    # Warm-up: parameters and their persistent gradient buffers.  Gradients
    # are tagged Intermediate (they are training state, not weights).
    w0 = em.alloc(w0_b, BlockClass.PARAMETER)
    b0 = em.alloc(b0_b, BlockClass.PARAMETER)
    w1 = em.alloc(w1_b, BlockClass.PARAMETER)
    b1 = em.alloc(b1_b, BlockClass.PARAMETER)
    gw0 = em.alloc(w0_b, BlockClass.INTERMEDIATE)
    gb0 = em.alloc(b0_b, BlockClass.INTERMEDIATE)
    gw1 = em.alloc(w1_b, BlockClass.INTERMEDIATE)
    gb1 = em.alloc(b1_b, BlockClass.INTERMEDIATE)
    warmup_events = len(em.events)

    for it in range(config.iterations):
        em.hint = it
        # forward; activations not needed for backward are freed at their
        # last forward use, so first-fit can recycle their bands
        x = em.alloc(in_b, BlockClass.INPUT)
        em.write(x)  # host input copy
        z0 = em.alloc(hid_b, BlockClass.INTERMEDIATE)
        em.read(x, w0)
        em.write(z0)
        z1 = em.alloc(hid_b, BlockClass.INTERMEDIATE)
        em.read(z0, b0)
        em.write(z1)
        em.free(z0)
        h = em.alloc(hid_b, BlockClass.INTERMEDIATE)
        em.read(z1)
        em.write(h)
        z2 = em.alloc(out_b, BlockClass.INTERMEDIATE)
        em.read(h, w1)
        em.write(z2)
        y = em.alloc(out_b, BlockClass.INTERMEDIATE)
        em.read(z2, b1)
        em.write(y)
        em.free(z2)
        # backward
        dy = em.alloc(out_b, BlockClass.INTERMEDIATE)
        em.read(y)
        em.write(dy)
        em.free(y)
        em.read(dy)
        em.write(gb1)
        dh = em.alloc(hid_b, BlockClass.INTERMEDIATE)
        em.read(dy, w1)
        em.write(dh)
        em.read(h, dy)
        em.write(gw1)
        em.free(dy, h)
        dz1 = em.alloc(hid_b, BlockClass.INTERMEDIATE)
        em.read(dh, z1)
        em.write(dz1)
        em.free(dh, z1)
        em.read(dz1)
        em.write(gb0)
        em.read(x, dz1)
        em.write(gw0)
        em.free(dz1, x)
        # SGD update
        for grad, param in ((gw0, w0), (gb0, b0), (gw1, w1), (gb1, b1)):
            em.read(grad, param)
            em.write(param)
    em.hint = None

    total = len(em.events)
    per_iter = (total - warmup_events) // config.iterations
    manifest = Manifest(
        iterations=config.iterations,
        warmup_events=warmup_events,
        events_per_iteration=per_iter,
        total_events=total,
        parameter_bytes=config.parameter_bytes,
        peak_bytes=em.peak,
        peak_timestamp_us=em.peak_ts,
        class_bytes_at_peak=em.peak_classes,
        access_counts=dict(em.access_counts),
        block_sizes=dict(em.sizes),
        block_classes=dict(em.classes),
    )
    meta = {
        "source": "memtrace-synthgen",
        "model": "mlp",
        "d_in": str(config.d_in),
        "d_hidden": str(config.d_hidden),
        "d_out": str(config.d_out),
        "batch": str(config.batch),
        "iterations": str(config.iterations),
        "element_bytes": str(config.element_bytes),
        "bytes_per_us": str(config.bytes_per_us),
    }
    return Trace(events=tuple(em.events), meta=meta), manifest


def plant_outlier(
    config: MlpConfig, size_bytes: int, idle_us: int
) -> Tuple[Trace, Manifest]:
    """Training trace plus one long-idle Intermediate block whose two accesses
    straddle the peak timestamp; the manifest records its block id."""
    if size_bytes <= 0 or idle_us <= 0:
        raise ConfigError("outlier size and idle time must be positive")
    trace, manifest = generate_mlp(config)
    bid = max(manifest.block_sizes) + 1
    t_first = manifest.peak_timestamp_us
    t_second = t_first + idle_us

    def ev(seq: int, ts: int, kind: EventKind) -> MemoryEvent:
        return MemoryEvent(seq, ts, kind, bid, size_bytes,
                           block_class=BlockClass.INTERMEDIATE)

    extra = [
        (0, EventKind.ALLOC),
        (t_first, EventKind.WRITE),
        (t_second, EventKind.READ),
        (t_second + 1, EventKind.FREE),
    ]
    timestamps = [e.timestamp_us for e in trace.events]
    merged: List[MemoryEvent] = list(trace.events)
    # insert after existing events with the same timestamp, latest first so
    # earlier insertions do not shift later positions
    for ts, kind in reversed(extra):
        pos = bisect_right(timestamps, ts)
        merged.insert(pos, ev(0, ts, kind))
        timestamps.insert(pos, ts)
    merged = [
        MemoryEvent(i, e.timestamp_us, e.kind, e.block_id, e.size_bytes,
                    e.address, e.block_class, e.iteration_hint)
        for i, e in enumerate(merged)
    ]

    # The outlier is live across the whole original span, so the peak keeps
    # its timestamp and grows by the planted size.
    manifest.peak_bytes += size_bytes
    manifest.class_bytes_at_peak = dict(manifest.class_bytes_at_peak)
    manifest.class_bytes_at_peak[BlockClass.INTERMEDIATE] += size_bytes
    manifest.access_counts[bid] = 2
    manifest.block_sizes[bid] = size_bytes
    manifest.block_classes[bid] = BlockClass.INTERMEDIATE
    manifest.total_events += len(extra)
    manifest.outlier_block_id = bid
    return Trace(events=tuple(merged), meta=dict(trace.meta)), manifest


def write_manifest(manifest: Manifest, fh: TextIO) -> None:
    """key=value lines plus a per-block table (sidecar format)."""
    w = fh.write
    w(f"iterations={manifest.iterations}\n")
    w(f"warmup_events={manifest.warmup_events}\n")
    w(f"events_per_iteration={manifest.events_per_iteration}\n")
    w(f"total_events={manifest.total_events}\n")
    w(f"parameter_bytes={manifest.parameter_bytes}\n")
    w(f"peak_bytes={manifest.peak_bytes}\n")
    w(f"peak_timestamp_us={manifest.peak_timestamp_us}\n")
    for cls in CLASS_ORDER:
        w(f"class_bytes_at_peak.{cls.value}={manifest.class_bytes_at_peak.get(cls, 0)}\n")
    if manifest.outlier_block_id is not None:
        w(f"outlier_block_id={manifest.outlier_block_id}\n")
    w("[blocks]\n")
    w("block_id,size_bytes,class,access_count\n")
    for bid in sorted(manifest.block_sizes):
        w(f"{bid},{manifest.block_sizes[bid]},{manifest.block_classes[bid].value},"
          f"{manifest.access_counts[bid]}\n")


def read_manifest(fh: TextIO) -> Manifest:
    keys: Dict[str, str] = {}
    blocks: List[Tuple[int, int, BlockClass, int]] = []
    in_table = False
    header_seen = False
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line == "[blocks]":
            in_table = True
            continue
        if in_table:
            if not header_seen:
                header_seen = True
                continue
            bid, size, cls, count = line.split(",")
            blocks.append((int(bid), int(size), BlockClass(cls), int(count)))
        else:
            key, _, value = line.partition("=")
            keys[key] = value
    return Manifest(
        iterations=int(keys["iterations"]),
        warmup_events=int(keys["warmup_events"]),
        events_per_iteration=int(keys["events_per_iteration"]),
        total_events=int(keys["total_events"]),
        parameter_bytes=int(keys["parameter_bytes"]),
        peak_bytes=int(keys["peak_bytes"]),
        peak_timestamp_us=int(keys["peak_timestamp_us"]),
        class_bytes_at_peak={
            cls: int(keys.get(f"class_bytes_at_peak.{cls.value}", 0)) for cls in CLASS_ORDER
        },
        access_counts={bid: count for bid, _, _, count in blocks},
        block_sizes={bid: size for bid, size, _, _ in blocks},
        block_classes={bid: cls for bid, _, cls, _ in blocks},
        outlier_block_id=(
            int(keys["outlier_block_id"]) if "outlier_block_id" in keys else None
        ),
    )
