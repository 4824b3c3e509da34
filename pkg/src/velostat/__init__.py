"""Bike-share station availability analytics.

Pipeline: ingest station snapshots, resample them onto a fixed intra-day
grid, infer daily check-in/check-out traffic, cluster day profiles with
k-means, read the clusters against the calendar, and validate new days
against the learned patterns.
"""

from .cluster import ClusterModel, KmeansConfig, fit, inertia_sweep, predict
from .config import PipelineConfig
from .errors import VelostatError
from .flows import FlowSummary, daily_traffic_table, infer_flows, rank_stations
from .grid import DayProfile, ImputationPolicy, TimeGrid, build_day_profile, profiles_for_range
from .ingest import SnapshotArchive, StationSnapshot, parse_feed_document, read_archive, write_archive
from .patterns import (
    ConsistencyReport,
    DayTypeMap,
    WeekdayCrossTab,
    consistency_check,
    crosstab,
    derive_day_type_map,
    effective_day_type,
)
from .synth import StationArchetype, SyntheticScenario, builtin_archetypes, generate_archive

__version__ = "0.1.0"

__all__ = [
    "ClusterModel",
    "ConsistencyReport",
    "DayProfile",
    "DayTypeMap",
    "FlowSummary",
    "ImputationPolicy",
    "KmeansConfig",
    "PipelineConfig",
    "SnapshotArchive",
    "StationArchetype",
    "StationSnapshot",
    "SyntheticScenario",
    "TimeGrid",
    "VelostatError",
    "WeekdayCrossTab",
    "builtin_archetypes",
    "build_day_profile",
    "consistency_check",
    "crosstab",
    "daily_traffic_table",
    "derive_day_type_map",
    "effective_day_type",
    "fit",
    "generate_archive",
    "inertia_sweep",
    "infer_flows",
    "parse_feed_document",
    "predict",
    "profiles_for_range",
    "rank_stations",
    "read_archive",
    "write_archive",
    "__version__",
]
