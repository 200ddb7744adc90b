"""
Start and end detection on the carried object's centre-of-mass series.

The start is the first sample whose displacement from the initial position
reaches ``start_fraction`` of the total displacement. The end is the first
sample of a run of in-band samples (displacement at least ``end_fraction`` of
the total) lasting ``dwell`` seconds. In strict mode that run must be the
final one and reach the end of the record.
"""

from typing import NamedTuple, Tuple

import numpy as np

from cocarry.exceptions import BoundDetectionError, MetricsError

# Relative slack on threshold and dwell comparisons.
TOLERANCE = 1e-9


class Bounds(NamedTuple):
    t_s: float
    t_e: float

    @property
    def duration(self) -> float:
        return self.t_e - self.t_s


def displacement(positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim == 1:
        positions = positions[:, None]
    return np.linalg.norm(positions - positions[0], axis=1)


def _runs(flags: np.ndarray) -> list:
    """``(first, last)`` index pairs of consecutive True samples."""
    runs = []
    start = None
    for i, flag in enumerate(flags):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def detect_bounds(
    times: np.ndarray,
    positions: np.ndarray,
    start_fraction: float = 0.05,
    end_fraction: float = 0.95,
    dwell: float = 0.5,
    strict: bool = True,
) -> Bounds:
    times = np.asarray(times, dtype=np.float64)
    d = displacement(positions)
    if times.shape[0] != d.shape[0] or times.shape[0] < 2:
        raise MetricsError("Bound detection needs matching series of at least two samples", context={"samples": times.shape[0]})
    total = d[-1]
    if not total > 0:
        raise BoundDetectionError("Object did not move", bound="start", context={"total_displacement": float(total)})

    started = np.flatnonzero(d >= start_fraction * total * (1.0 - TOLERANCE))
    if started.size == 0:
        raise BoundDetectionError("Displacement never reached the start threshold", bound="start")
    t_s = float(times[started[0]])

    runs = _runs(d >= end_fraction * total * (1.0 - TOLERANCE))
    held = [(a, b) for a, b in runs if times[b] - times[a] >= dwell * (1.0 - TOLERANCE) - TOLERANCE]
    if strict:
        last = runs[-1] if runs else None
        if last is None or last[1] != len(d) - 1 or last not in held:
            raise BoundDetectionError(
                "Object did not settle within the goal band through the end of the record",
                bound="end",
                context={"dwell": dwell, "end_fraction": end_fraction},
            )
        t_e = float(times[last[0]])
    else:
        if not held:
            raise BoundDetectionError(
                "Object never stayed within the goal band for the dwell time",
                bound="end",
                context={"dwell": dwell, "end_fraction": end_fraction},
            )
        t_e = float(times[held[0][0]])
    return Bounds(t_s, t_e)


def completion_time(bounds: Tuple[float, float]) -> float:
    t_s, t_e = bounds
    return float(t_e - t_s)
