"""
Edge placement engine: base-station reconstruction from crowd-sourced cellular
traces, complete-linkage clustering under a distance bound, and avg/peak
utilization analysis of the resulting edge server sites.
"""

from .clustering import MergeTree, Partition, build_merge_tree, cut_at_threshold
from .errors import EdgePlacementError
from .metrics import efficiency, evaluate_partition, sweep
from .models import CellId, LoadSeries, Station, TraceRecord
from .network_recon import build_load_series, reconstruct_stations

__all__ = [
    "CellId", "EdgePlacementError", "LoadSeries", "MergeTree", "Partition", "Station", "TraceRecord",
    "build_load_series", "build_merge_tree", "cut_at_threshold", "efficiency", "evaluate_partition",
    "reconstruct_stations", "sweep",
]
