"""Stream execution: windows, signatures, similarity operators and the executor."""

from .executor import EngineConfig, EngineContext, execute, pulse_ticks, standard_sequencing
from .index import AdaptiveIndex
from .metrics import Metrics
from .mws import EmptyWindowError, MwsSignature, compute_mws, window_stats
from .planner import AccessPlan, SimilarityCondition, access_mode, evaluate_archive, plan_hybrid
from .similarity import LengthMismatch, UndefinedCorrelation, cosine, pearson
from .store import WindowRecord, WindowStore
from .windows import Measurement, Window, WindowAssigner, read_stream_csv, write_stream_csv

__all__ = [
    "AccessPlan", "AdaptiveIndex", "EmptyWindowError", "EngineConfig", "EngineContext", "LengthMismatch",
    "Measurement", "Metrics", "MwsSignature", "SimilarityCondition", "UndefinedCorrelation", "Window",
    "WindowAssigner", "WindowRecord", "WindowStore", "access_mode", "compute_mws", "cosine", "evaluate_archive",
    "execute", "pearson", "plan_hybrid", "pulse_ticks", "read_stream_csv", "standard_sequencing",
    "window_stats", "write_stream_csv",
]
