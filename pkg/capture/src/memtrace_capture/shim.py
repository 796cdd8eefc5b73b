"""Capture shim: turns a framework's allocator/operator callbacks into a
``.memtrace`` file.

The shim is deliberately independent of the analysis library; it only needs
to emit the trace file format:

    seq,timestamp_us,kind,block_id,size_bytes,address,class,iteration_hint

with kind ``A``/``F``/``R``/``W``, class ``IN``/``PARAM``/``INTER``/``OTHER``/
``UNK`` and ``# key=value`` metadata lines.  Allocator hooks alone can only
observe mallocs and frees, so A/F lines are the default; ``record_operator``
adds coarse-grained R/W lines at operator granularity for callers that also
hook operator dispatch.
"""

from __future__ import annotations

import fnmatch
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

VALID_CLASSES = ("IN", "PARAM", "INTER", "OTHER", "UNK")


class CaptureError(Exception):
    """Base class for capture-side errors."""


class RulesError(CaptureError):
    """Malformed class-tagging rules."""


class SessionClosedError(CaptureError):
    """Operation on a session that was already stopped."""


@dataclass
class _LiveBlock:
    block_id: int
    size_bytes: int
    block_class: str


@dataclass
class CaptureSession:
    """Single-threaded capture state; create via start_capture().

    The framework must deliver callbacks serially: the session keeps one
    writer and one monotonically increasing sequence counter.
    """

    path: Path
    rules: Tuple[Tuple[str, str], ...]
    clock: Callable[[], float]
    origin: float
    next_seq: int = 0
    next_block_id: int = 0
    last_timestamp_us: int = 0
    iteration_hint: Optional[int] = None
    live: Dict[int, _LiveBlock] = field(default_factory=dict)  # pointer -> block
    diagnostics: List[str] = field(default_factory=list)
    closed: bool = False
    _fh: object = None

    def set_iteration(self, hint: Optional[int]) -> None:
        """Label subsequent events with a capture-time iteration number."""
        self.iteration_hint = hint


def load_rules(path) -> Tuple[Tuple[str, str], ...]:
    """Read ``pattern=CLASS`` lines; first matching pattern wins at alloc."""
    rules: List[Tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            pattern, sep, cls = line.partition("=")
            pattern, cls = pattern.strip(), cls.strip()
            if not sep or not pattern:
                raise RulesError(f"line {line_no}: expected pattern=CLASS, got {line!r}")
            if cls not in VALID_CLASSES:
                raise RulesError(
                    f"line {line_no}: unknown class {cls!r} (one of {', '.join(VALID_CLASSES)})"
                )
            rules.append((pattern, cls))
    return tuple(rules)


def start_capture(
    path,
    rules: Sequence[Tuple[str, str]] = (),
    metadata: Optional[Dict[str, str]] = None,
    clock: Optional[Callable[[], float]] = None,
) -> CaptureSession:
    """Open a capture file and write its metadata header.

    rules are (name-pattern, class) pairs as returned by load_rules();
    clock defaults to time.monotonic and is injectable for deterministic tests.
    """
    path = Path(path)
    clock = clock if clock is not None else time.monotonic
    fh = open(path, "w", encoding="utf-8", newline="\n")
    header = {"source": "memtrace-capture"}
    if metadata:
        header.update(metadata)
    for key, value in header.items():
        fh.write(f"# {key}={value}\n")
    session = CaptureSession(
        path=path,
        rules=tuple(rules),
        clock=clock,
        origin=clock(),
    )
    session._fh = fh
    return session


def _classify(session: CaptureSession, name: Optional[str]) -> str:
    if name is not None:
        for pattern, cls in session.rules:
            if fnmatch.fnmatchcase(name, pattern):
                return cls
    return "UNK"


def _timestamp_us(session: CaptureSession) -> int:
    now = int((session.clock() - session.origin) * 1_000_000)
    # clamp: the trace format requires non-decreasing timestamps
    if now < session.last_timestamp_us:
        now = session.last_timestamp_us
    session.last_timestamp_us = now
    return now


def _emit(session: CaptureSession, kind: str, block: _LiveBlock, pointer: int) -> None:
    if session.closed:
        raise SessionClosedError(f"capture to {session.path} already stopped")
    seq = session.next_seq
    session.next_seq = seq + 1
    ts = _timestamp_us(session)
    hint = "" if session.iteration_hint is None else session.iteration_hint
    session._fh.write(
        f"{seq},{ts},{kind},{block.block_id},{block.size_bytes},"
        f"{pointer},{block.block_class},{hint}\n"
    )


def on_alloc(
    session: CaptureSession, pointer: int, size: int, name: Optional[str] = None
) -> int:
    """Record an allocation; returns the assigned block id.

    name, when the framework provides one (e.g. a parameter name), is matched
    against the tagging rules; blocks without a matching rule stay UNK.
    """
    if session.closed:
        raise SessionClosedError(f"capture to {session.path} already stopped")
    if pointer in session.live:
        session.diagnostics.append(
            f"alloc of pointer {pointer:#x} that is already live; event dropped"
        )
        return session.live[pointer].block_id
    if size <= 0:
        session.diagnostics.append(
            f"alloc of pointer {pointer:#x} with non-positive size {size}; event dropped"
        )
        return -1
    block = _LiveBlock(session.next_block_id, size, _classify(session, name))
    session.next_block_id += 1
    session.live[pointer] = block
    _emit(session, "A", block, pointer)
    return block.block_id


def on_free(session: CaptureSession, pointer: int) -> None:
    """Record a free; an untracked pointer yields a diagnostic and no line."""
    if session.closed:
        raise SessionClosedError(f"capture to {session.path} already stopped")
    block = session.live.pop(pointer, None)
    if block is None:
        session.diagnostics.append(f"free of untracked pointer {pointer:#x}; no event emitted")
        return
    _emit(session, "F", block, pointer)


def _access(session: CaptureSession, pointer: int, kind: str) -> None:
    block = session.live.get(pointer)
    if block is None:
        session.diagnostics.append(
            f"{'read' if kind == 'R' else 'write'} of untracked pointer "
            f"{pointer:#x}; no event emitted"
        )
        return
    _emit(session, kind, block, pointer)


def on_read(session: CaptureSession, pointer: int) -> None:
    """Record a read of a live block (operator-level granularity)."""
    if session.closed:
        raise SessionClosedError(f"capture to {session.path} already stopped")
    _access(session, pointer, "R")


def on_write(session: CaptureSession, pointer: int) -> None:
    """Record a write to a live block (operator-level granularity)."""
    if session.closed:
        raise SessionClosedError(f"capture to {session.path} already stopped")
    _access(session, pointer, "W")


def record_operator(
    session: CaptureSession,
    reads: Iterable[int] = (),
    writes: Iterable[int] = (),
) -> None:
    """One R line per input pointer then one W line per output pointer.

    This is the coarse operator-dispatch approximation of memory accesses:
    each tensor argument counts as a single access at dispatch time.
    """
    for pointer in reads:
        on_read(session, pointer)
    for pointer in writes:
        on_write(session, pointer)


def stop_capture(session: CaptureSession) -> Path:
    """Flush and close the capture file; leaked blocks stay un-freed."""
    if session.closed:
        raise SessionClosedError(f"capture to {session.path} already stopped")
    session.closed = True
    if session.live:
        session.diagnostics.append(
            f"{len(session.live)} block(s) still live at stop; left as leaks"
        )
    session._fh.close()
    return session.path
