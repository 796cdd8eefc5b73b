import random

import pytest

from memtrace.trace import (
    BlockClass,
    EventKind,
    MemoryEvent,
    Trace,
)

CLASSES = list(BlockClass)


def make_random_trace(rng: random.Random, max_blocks: int = 40,
                      max_accesses: int = 8, with_addresses: bool = False) -> Trace:
    """Random valid trace built block by block, then interleaved by timestamp.

    Stable sorting by timestamp preserves each block's internal event order,
    so all per-block invariants hold by construction.
    """
    n_blocks = rng.randint(1, max_blocks)
    per_block = []
    next_addr = 0
    for bid in range(n_blocks):
        size = rng.randint(1, 4096)
        alloc = rng.randint(0, 500)
        events = [(alloc, EventKind.ALLOC)]
        t = alloc
        for _ in range(rng.randint(0, max_accesses)):
            t += rng.randint(0, 50)
            events.append((t, rng.choice((EventKind.READ, EventKind.WRITE))))
        freed = rng.random() < 0.8
        if freed:
            t += rng.randint(0, 50)
            events.append((t, EventKind.FREE))
        addr = None
        if with_addresses:
            addr = next_addr
            next_addr += size
        cls = rng.choice(CLASSES)
        per_block.append((bid, size, cls, addr, events))

    flat = []
    for bid, size, cls, addr, events in per_block:
        for ts, kind in events:
            flat.append((ts, bid, size, cls, addr, kind))
    flat.sort(key=lambda item: item[0])  # stable: per-block order preserved
    events = tuple(
        MemoryEvent(seq, ts, kind, bid, size, addr, cls)
        for seq, (ts, bid, size, cls, addr, kind) in enumerate(flat)
    )
    return Trace(events=events, meta={})


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
