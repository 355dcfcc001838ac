"""Discrete-event simulation of client-side consistency-latency tuning for quorum stores."""

from .core import ConsistencyLevel, OperationRecord, OpKind, RngStream, Trace, load_trace, save_trace, validate_trace
from .gamma import ScoreReport, analyze, min_stretch_oracle, per_value_scores
from .policy import AD, CPQ, Fixed
from .workload import Simulation, WorkloadConfig

__version__ = "0.1.0"

__all__ = [
    "AD", "CPQ", "ConsistencyLevel", "Fixed", "OpKind", "OperationRecord", "RngStream",
    "ScoreReport", "Simulation", "Trace", "WorkloadConfig", "analyze", "load_trace",
    "min_stretch_oracle", "per_value_scores", "save_trace", "validate_trace",
]
