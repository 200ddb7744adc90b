"""Dyadic co-manipulation metrics: bounds, time-averaged integrals and reports."""

from cocarry.metrics.bounds import Bounds, completion_time, detect_bounds, displacement
from cocarry.metrics.integrals import (
    TrajectoryPair,
    WrenchPair,
    avg_follower_force,
    trajectory_deviation,
    velocity_difference,
    window_mean,
)
from cocarry.metrics.report import (
    MetricsReport,
    TrialMetrics,
    build_report,
    evaluate_log,
    evaluate_trial,
    load_metrics_csv,
    object_series_from_log,
    render_report,
    trajectory_pair_from_log,
    wrench_pair_from_log,
    write_report,
)

__all__ = [
    "Bounds",
    "MetricsReport",
    "TrajectoryPair",
    "TrialMetrics",
    "WrenchPair",
    "avg_follower_force",
    "build_report",
    "completion_time",
    "detect_bounds",
    "displacement",
    "evaluate_log",
    "evaluate_trial",
    "load_metrics_csv",
    "object_series_from_log",
    "render_report",
    "trajectory_deviation",
    "trajectory_pair_from_log",
    "velocity_difference",
    "window_mean",
    "wrench_pair_from_log",
    "write_report",
]
