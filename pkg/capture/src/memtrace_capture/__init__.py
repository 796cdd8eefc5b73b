"""Allocator-callback capture shim emitting the .memtrace trace format."""

from .shim import (
    CaptureError,
    CaptureSession,
    RulesError,
    SessionClosedError,
    load_rules,
    on_alloc,
    on_free,
    on_read,
    on_write,
    record_operator,
    start_capture,
    stop_capture,
)

__all__ = [
    "CaptureError",
    "CaptureSession",
    "RulesError",
    "SessionClosedError",
    "load_rules",
    "on_alloc",
    "on_free",
    "on_read",
    "on_write",
    "record_operator",
    "start_capture",
    "stop_capture",
]
