"""
Per-trial evaluation and the comparison report.

Inputs are dyad logs or a bare CSV with columns ``t``, ``xh_x..xh_z``,
``xr_x..xr_z``, ``f1_x..f1_z`` and ``f2_x..f2_z``. The report is rendered as
a plain-text table and written as JSON and CSV.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from cocarry.config import MetricsConfig
from cocarry.constants import TABLE_I_FIXTURES
from cocarry.dyad.logio import DyadLog
from cocarry.exceptions import MetricsError
from cocarry.format import create_table, format_metric, render_table
from cocarry.metrics.bounds import Bounds, completion_time, detect_bounds
from cocarry.metrics.integrals import TrajectoryPair, WrenchPair, avg_follower_force, trajectory_deviation, velocity_difference

METRICS: Tuple[Tuple[str, str, int], ...] = (
    ("completion_time", TABLE_I_FIXTURES[0][0], 2),
    ("trajectory_deviation", TABLE_I_FIXTURES[1][0], 4),
    ("velocity_difference", TABLE_I_FIXTURES[2][0], 3),
    ("avg_follower_force", TABLE_I_FIXTURES[3][0], 3),
)
FIXTURE_COLUMNS = ("Human-Human (ref)", "Human-Humanoid (ref)")
LOWER_IS_BETTER = "↓"
CSV_COLUMNS = ["t"] + [f"{group}_{axis}" for group in ("xh", "xr", "f1", "f2") for axis in "xyz"]


@dataclass
class TrialMetrics:
    completion_time: float
    trajectory_deviation: float
    velocity_difference: float
    avg_follower_force: float
    t_s: float
    t_e: float
    label: str = ""

    @property
    def bounds(self) -> Bounds:
        return Bounds(self.t_s, self.t_e)


# -- adapters -----------------------------------------------------------------


def _lift(planar: np.ndarray) -> np.ndarray:
    return np.concatenate([planar, np.zeros((planar.shape[0], 1))], axis=1)


def trajectory_pair_from_log(log: DyadLog) -> TrajectoryPair:
    """Leader handle and follower grip displacements from their starts, at the frame rate (z = 0)."""
    human = _lift(log.leader[:, :2] - log.leader[0, :2])
    robot = _lift(log.follower[:, :2] - log.follower[0, :2])
    return TrajectoryPair(log.frame_t, human, robot)


def wrench_pair_from_log(log: DyadLog) -> WrenchPair:
    return WrenchPair(log.wrench_t, log.wrench1[:, :3], log.wrench2[:, :3])


def object_series_from_log(log: DyadLog) -> Tuple[np.ndarray, np.ndarray]:
    return log.frame_t, log.object[:, :2]


def load_metrics_csv(path: Union[str, Path]) -> Tuple[TrajectoryPair, WrenchPair, Tuple[np.ndarray, np.ndarray]]:
    """Trajectory pair, wrench pair and object series from a bare metrics CSV.

    The object series is the midpoint of the two trajectories.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise MetricsError(f"Cannot read metrics CSV: {exc}", context={"path": str(path)}) from None
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise MetricsError(
            "Metrics CSV is missing columns",
            context={"path": str(path), "missing": missing},
            suggestions=[f"Expected header: {','.join(CSV_COLUMNS)}"],
        )
    t = frame["t"].to_numpy(dtype=np.float64)

    def group(prefix: str) -> np.ndarray:
        return frame[[f"{prefix}_{axis}" for axis in "xyz"]].to_numpy(dtype=np.float64)

    human, robot = group("xh"), group("xr")
    pair = TrajectoryPair(t, human, robot)
    wrenches = WrenchPair(t, group("f1"), group("f2"))
    return pair, wrenches, (t, 0.5 * (human + robot))


# -- evaluation -----------------------------------------------------------------


def evaluate_trial(
    pair: TrajectoryPair,
    wrenches: WrenchPair,
    object_series: Tuple[np.ndarray, np.ndarray],
    config: Optional[MetricsConfig] = None,
    label: str = "",
) -> TrialMetrics:
    """All four metrics over the bounds detected on ``object_series``."""
    config = config or MetricsConfig()
    bounds = detect_bounds(
        object_series[0],
        object_series[1],
        start_fraction=config.start_fraction,
        end_fraction=config.end_fraction,
        dwell=config.dwell_s,
        strict=config.strict_end,
    )
    return TrialMetrics(
        completion_time=completion_time(bounds),
        trajectory_deviation=trajectory_deviation(pair, bounds),
        velocity_difference=velocity_difference(pair, bounds),
        avg_follower_force=avg_follower_force(wrenches, bounds),
        t_s=bounds.t_s,
        t_e=bounds.t_e,
        label=label,
    )


def evaluate_log(log: DyadLog, config: Optional[MetricsConfig] = None, label: str = "") -> TrialMetrics:
    return evaluate_trial(
        trajectory_pair_from_log(log),
        wrench_pair_from_log(log),
        object_series_from_log(log),
        config,
        label or str(log.meta.get("kind", "")),
    )


# -- report -----------------------------------------------------------------------


@dataclass
class MetricSummary:
    mean: float
    std: Optional[float]
    trials: int


@dataclass
class MetricsReport:
    """Per-column summaries of each metric next to the printed reference values."""

    columns: Dict[str, Dict[str, MetricSummary]]
    bounds: Dict[str, List[Tuple[float, float]]]
    fixtures: Tuple[Tuple[str, str, str], ...] = TABLE_I_FIXTURES
    trials: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metrics": [key for key, _, _ in METRICS],
            "columns": {name: {k: asdict(v) for k, v in col.items()} for name, col in self.columns.items()},
            "bounds": {name: [list(b) for b in bounds] for name, bounds in self.bounds.items()},
            "fixtures": [list(row) for row in self.fixtures],
            "trials": self.trials,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _summarize(trials: Sequence[TrialMetrics], key: str) -> MetricSummary:
    values = np.array([getattr(t, key) for t in trials], dtype=np.float64)
    std = float(values.std(ddof=1)) if len(values) >= 2 else None
    return MetricSummary(float(values.mean()), std, len(values))


def build_report(
    metrics: Union[Sequence[TrialMetrics], Mapping[str, Sequence[TrialMetrics]]],
    fixtures: Tuple[Tuple[str, str, str], ...] = TABLE_I_FIXTURES,
) -> MetricsReport:
    """Summarize one or more columns of trials; std is reported with two or more trials."""
    columns = dict(metrics) if isinstance(metrics, Mapping) else {"measured": list(metrics)}
    if not columns or any(len(trials) == 0 for trials in columns.values()):
        raise MetricsError("Report needs at least one trial per column", context={"columns": list(columns)})
    return MetricsReport(
        columns={name: {key: _summarize(trials, key) for key, _, _ in METRICS} for name, trials in columns.items()},
        bounds={name: [tuple(t.bounds) for t in trials] for name, trials in columns.items()},
        fixtures=fixtures,
        trials={name: [asdict(t) for t in trials] for name, trials in columns.items()},
    )


def report_rows(report: MetricsReport) -> List[Dict[str, str]]:
    fixture_values = {row[0]: row[1:] for row in report.fixtures}
    rows = []
    for key, label, digits in METRICS:
        row = {"Metric": f"{label} {LOWER_IS_BETTER}"}
        for name, column in report.columns.items():
            summary = column[key]
            row[name] = format_metric(summary.mean, summary.std, digits)
        refs = fixture_values.get(label, ("", ""))
        for header, value in zip(FIXTURE_COLUMNS, refs):
            row[header] = value
        rows.append(row)
    return rows


def render_report(report: MetricsReport, title: str = "Co-manipulation metrics (mean ± std)") -> str:
    return render_table(create_table(report_rows(report), title=title))


def write_report(report: MetricsReport, out_dir: Union[str, Path], stem: str = "report") -> List[Path]:
    """Write ``<stem>.json``, ``<stem>.txt`` and ``<stem>.csv``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.json", out / f"{stem}.txt", out / f"{stem}.csv"]
    paths[0].write_text(report.to_json() + "\n", encoding="utf-8")
    paths[1].write_text(render_report(report), encoding="utf-8")
    pd.DataFrame(report_rows(report)).to_csv(paths[2], index=False)
    return paths
