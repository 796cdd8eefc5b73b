"""Canonical device-memory trace model: events, parsing, serialization, block index.

Trace files (".memtrace") are UTF-8 text, one event per line:

    seq,timestamp_us,kind,block_id,size_bytes,address,class,iteration_hint

kind is one of A/F/R/W, class one of IN/PARAM/INTER/OTHER/UNK.  Absent
optional fields (address, iteration_hint) are empty.  Lines starting with
``#`` carry metadata as ``# key=value``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import (
    BinaryIO,
    Dict,
    Iterable,
    List,
    NamedTuple,
    Optional,
    TextIO,
    Tuple,
    Union,
)


class EventKind(str, Enum):
    ALLOC = "A"
    FREE = "F"
    READ = "R"
    WRITE = "W"


class BlockClass(str, Enum):
    INPUT = "IN"
    PARAMETER = "PARAM"
    INTERMEDIATE = "INTER"
    OTHER = "OTHER"
    UNKNOWN = "UNK"


# Fixed reporting order for per-class tables.
CLASS_ORDER: Tuple[BlockClass, ...] = (
    BlockClass.INPUT,
    BlockClass.PARAMETER,
    BlockClass.INTERMEDIATE,
    BlockClass.OTHER,
    BlockClass.UNKNOWN,
)

_KIND_BY_CODE = {k.value: k for k in EventKind}
_CLASS_BY_CODE = {c.value: c for c in BlockClass}


class TraceError(Exception):
    """Base class for trace ingestion errors."""


class TraceSyntaxError(TraceError):
    """Malformed trace line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TraceValidationError(TraceError):
    """Structurally well-formed input violating a cross-event invariant."""

    def __init__(self, seq: int, message: str):
        super().__init__(f"event seq={seq}: {message}")
        self.seq = seq


class EmptyTraceError(TraceError):
    """Input contained no events."""


# NamedTuple rather than a frozen dataclass: traces run to millions of events
# and tuple construction is what keeps parsing fast.
class MemoryEvent(NamedTuple):
    seq: int
    timestamp_us: int
    kind: EventKind
    block_id: int
    size_bytes: int
    address: Optional[int] = None
    block_class: BlockClass = BlockClass.UNKNOWN
    iteration_hint: Optional[int] = None


@dataclass(frozen=True, slots=True)
class Trace:
    events: Tuple[MemoryEvent, ...]
    meta: Dict[str, str] = field(default_factory=dict)


class BlockRecord(NamedTuple):
    """Per-block history reconstructed from its events.

    ``free_us`` is None for blocks still alive at trace end (leaked).
    """

    block_id: int
    size_bytes: int
    block_class: BlockClass
    alloc_us: int
    free_us: Optional[int]
    access_us: Tuple[int, ...]
    address: Optional[int] = None

    @property
    def leaked(self) -> bool:
        return self.free_us is None


def validate_events(events: Iterable[MemoryEvent]) -> None:
    """Check all cross-event invariants; raise TraceValidationError on the first violation."""
    last_seq = None
    last_ts = None
    # block_id -> (size, freed?)
    state: Dict[int, Tuple[int, bool]] = {}
    for ev in events:
        if last_seq is not None and ev.seq <= last_seq:
            raise TraceValidationError(ev.seq, f"seq not strictly increasing (previous {last_seq})")
        if last_ts is not None and ev.timestamp_us < last_ts:
            raise TraceValidationError(ev.seq, f"timestamp decreased ({last_ts} -> {ev.timestamp_us})")
        last_seq, last_ts = ev.seq, ev.timestamp_us
        bid = ev.block_id
        if ev.kind is EventKind.ALLOC:
            if bid in state:
                raise TraceValidationError(ev.seq, f"duplicate Alloc for block {bid}")
            if ev.size_bytes <= 0:
                raise TraceValidationError(ev.seq, f"non-positive size on Alloc of block {bid}")
            state[bid] = (ev.size_bytes, False)
        else:
            if bid not in state:
                raise TraceValidationError(ev.seq, f"{ev.kind.value} before Alloc for block {bid}")
            size, freed = state[bid]
            if freed:
                raise TraceValidationError(ev.seq, f"{ev.kind.value} after Free for block {bid}")
            if ev.size_bytes != size:
                raise TraceValidationError(
                    ev.seq, f"size mismatch for block {bid} ({ev.size_bytes} != alloc size {size})"
                )
            if ev.kind is EventKind.FREE:
                state[bid] = (size, True)


TraceInput = Union[bytes, str, TextIO, BinaryIO]


def _as_text(data: TraceInput) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    if isinstance(data, str):
        return data
    raw = data.read()
    if isinstance(raw, bytes):
        return raw.decode("utf-8")
    return raw


def parse_trace(data: TraceInput) -> Trace:
    """Parse and validate a trace file.

    Raises TraceSyntaxError, TraceValidationError or EmptyTraceError.
    """
    text = _as_text(data)
    meta: Dict[str, str] = {}
    events: List[MemoryEvent] = []
    append = events.append
    make = MemoryEvent._make
    kind_by_code = _KIND_BY_CODE
    class_by_code = _CLASS_BY_CODE
    _alloc, _free = EventKind.ALLOC, EventKind.FREE

    last_seq = -1
    last_ts = -1
    state: Dict[int, Tuple[int, bool]] = {}

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        if line[0] == "#":
            body = line[1:].strip()
            if body:
                key, sep, value = body.partition("=")
                if not sep:
                    raise TraceSyntaxError(line_no, f"metadata line without '=': {line!r}")
                meta[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 8:
            if line.isspace():
                continue
            raise TraceSyntaxError(line_no, f"expected 8 fields, got {len(parts)}")
        s_seq, s_ts, s_kind, s_bid, s_size, s_addr, s_cls, s_hint = parts
        try:
            seq = int(s_seq)
            ts = int(s_ts)
            bid = int(s_bid)
            size = int(s_size)
            address = int(s_addr) if s_addr else None
            hint = int(s_hint) if s_hint else None
        except ValueError as exc:
            raise TraceSyntaxError(line_no, f"bad integer field: {exc}") from None
        kind = kind_by_code.get(s_kind)
        if kind is None:
            raise TraceSyntaxError(line_no, f"unknown event kind {s_kind!r}")
        cls = class_by_code.get(s_cls)
        if cls is None:
            raise TraceSyntaxError(line_no, f"unknown content class {s_cls!r}")
        if seq < 0 or ts < 0 or bid < 0 or size < 0:
            raise TraceSyntaxError(line_no, "negative value in unsigned field")

        # Inline validation (single pass).
        if seq <= last_seq:
            raise TraceValidationError(seq, f"seq not strictly increasing (previous {last_seq})")
        if ts < last_ts:
            raise TraceValidationError(seq, f"timestamp decreased ({last_ts} -> {ts})")
        last_seq, last_ts = seq, ts
        if kind is _alloc:
            if bid in state:
                raise TraceValidationError(seq, f"duplicate Alloc for block {bid}")
            if size <= 0:
                raise TraceValidationError(seq, f"non-positive size on Alloc of block {bid}")
            state[bid] = (size, False)
        else:
            entry = state.get(bid)
            if entry is None:
                raise TraceValidationError(seq, f"{s_kind} before Alloc for block {bid}")
            known_size, freed = entry
            if freed:
                raise TraceValidationError(seq, f"{s_kind} after Free for block {bid}")
            if size != known_size:
                raise TraceValidationError(
                    seq, f"size mismatch for block {bid} ({size} != alloc size {known_size})"
                )
            if kind is _free:
                state[bid] = (known_size, True)

        append(make((seq, ts, kind, bid, size, address, cls, hint)))

    if not events:
        raise EmptyTraceError("trace contains no events")
    return Trace(events=tuple(events), meta=meta)


def write_trace(trace: Trace) -> bytes:
    """Serialize a valid trace to canonical form (byte-deterministic)."""
    out: List[str] = []
    for key, value in trace.meta.items():
        out.append(f"# {key}={value}")
    for ev in trace.events:
        out.append(
            f"{ev.seq},{ev.timestamp_us},{ev.kind.value},{ev.block_id},{ev.size_bytes},"
            f"{'' if ev.address is None else ev.address},{ev.block_class.value},"
            f"{'' if ev.iteration_hint is None else ev.iteration_hint}"
        )
    return ("\n".join(out) + "\n").encode("utf-8")


def build_block_index(trace: Trace) -> Dict[int, BlockRecord]:
    """Build one BlockRecord per block, keyed by block_id, in allocation order."""
    alloc: Dict[int, MemoryEvent] = {}
    free_ts: Dict[int, int] = {}
    accesses: Dict[int, List[int]] = {}
    _alloc, _free = EventKind.ALLOC, EventKind.FREE
    for ev in trace.events:
        # positional access; attribute access on a NamedTuple is slower
        ts, kind, bid = ev[1], ev[2], ev[3]
        if kind is _alloc:
            alloc[bid] = ev
            accesses[bid] = []
        elif kind is _free:
            free_ts[bid] = ts
        else:
            accesses[bid].append(ts)
    index: Dict[int, BlockRecord] = {}
    make = BlockRecord._make
    get_free = free_ts.get
    for bid, ev in alloc.items():
        # (block_id, size, class, alloc_us, free_us, access_us, address)
        index[bid] = make(
            (bid, ev[4], ev[6], ev[1], get_free(bid), tuple(accesses[bid]), ev[5])
        )
    return index


def trace_end_us(index: Dict[int, BlockRecord]) -> int:
    """Timestamp of the last alloc/access/free in the index (0 if empty)."""
    end = 0
    for rec in index.values():
        end = max(end, rec.alloc_us)
        if rec.access_us:
            end = max(end, rec.access_us[-1])
        if rec.free_us is not None:
            end = max(end, rec.free_us)
    return end
