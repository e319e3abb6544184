"""Streaming trajectory simplification under per-window bandwidth caps."""

from .core import Node, Point, Sample, Trajectory, dist, interpolate_at, pos, sed
from .pqueue import PriorityQueue, QueueEntry
from .classic import (
    DRConfig,
    SquishConfig,
    STTrace,
    STTraceConfig,
    TDTRConfig,
    dead_reckoning,
    squish,
    sttrace,
    tdtr,
)
from .bwc import (
    BWCDR,
    BWCSquish,
    BWCSTTrace,
    BWCSTTraceImp,
    HistoryBuffer,
    ImpConfig,
    WindowConfig,
    bwc_dr,
    bwc_squish,
    bwc_sttrace,
    bwc_sttrace_imp,
    compute_priority_imp,
)
from .ingest import ProjectionSpec, Schema, SynthSpec, load_csv, merge_stream, project, synth
from .evaluation import AccuracyReport, WindowHistogram, accuracy, compare, window_histogram

__version__ = "0.1.0"
