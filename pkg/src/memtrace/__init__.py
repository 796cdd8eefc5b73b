"""Device-memory trace analysis toolkit for DNN training workloads."""

from .trace import (
    BlockClass,
    BlockRecord,
    EventKind,
    MemoryEvent,
    Trace,
    build_block_index,
    parse_trace,
    write_trace,
)
from .lifetime import (
    AtiSeries,
    GanttRow,
    TimelinePoint,
    compute_atis,
    fragmentation_timeline,
    gantt_layout,
    memory_timeline,
    peak_memory,
)
from .stats import DistributionSummary, ecdf, percentile, summarize
from .patterns import (
    IterationStructure,
    detect_iterations,
    detect_trace_iterations,
    iteration_stability,
    tokenize,
)
from .swap import (
    DEFAULT_BANDWIDTHS,
    BandwidthConfig,
    SwapCandidate,
    find_candidates,
    max_swap_size,
    min_hiding_interval,
    rank_candidates,
)
from .breakdown import BreakdownReport, breakdown_at, breakdown_at_peak, sweep_report
from .synthgen import Manifest, MlpConfig, generate_mlp, plant_outlier

__version__ = "0.1.0"
