"""Time-averaged trajectory, velocity and force metrics over a bounded window."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from cocarry.dyad.kinematics import finite_diff_velocity
from cocarry.exceptions import MetricsError


def _as_series(name: str, values: np.ndarray, length: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != length:
        raise MetricsError(f"Series '{name}' does not match the timestamps", context={"expected": length, "actual": values.shape[0]})
    return values


def _check_times(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.shape[0] < 2:
        raise MetricsError("Need at least two timestamps", context={"samples": int(times.size)})
    if np.any(np.diff(times) <= 0):
        raise MetricsError("Timestamps must be strictly increasing")
    return times


@dataclass
class TrajectoryPair:
    """Human (leader) and robot (follower) positions on a shared time base."""

    times: np.ndarray
    human: np.ndarray
    robot: np.ndarray
    human_velocity: Optional[np.ndarray] = None
    robot_velocity: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.times = _check_times(self.times)
        n = self.times.shape[0]
        self.human = _as_series("human", self.human, n)
        self.robot = _as_series("robot", self.robot, n)
        if self.human.shape != self.robot.shape:
            raise MetricsError("Trajectories differ in dimension", context={"human": self.human.shape, "robot": self.robot.shape})
        if self.human_velocity is not None:
            self.human_velocity = _as_series("human_velocity", self.human_velocity, n)
        if self.robot_velocity is not None:
            self.robot_velocity = _as_series("robot_velocity", self.robot_velocity, n)

    def velocities(self) -> Tuple[np.ndarray, np.ndarray]:
        """Stored velocities, or backward finite differences of the positions."""
        vh = self.human_velocity
        vr = self.robot_velocity
        if vh is None:
            vh = finite_diff_velocity(self.human, timestamps=self.times, angular=False)
        if vr is None:
            vr = finite_diff_velocity(self.robot, timestamps=self.times, angular=False)
        return vh, vr


@dataclass
class WrenchPair:
    times: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    def __post_init__(self) -> None:
        self.times = _check_times(self.times)
        n = self.times.shape[0]
        self.f1 = _as_series("f1", self.f1, n)
        self.f2 = _as_series("f2", self.f2, n)


def window_mean(times: np.ndarray, values: np.ndarray, t_s: float, t_e: float) -> float:
    """Trapezoidal mean of a scalar series over ``[t_s, t_e]``.

    End points falling between samples are linearly interpolated.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if not t_e > t_s:
        raise MetricsError("Integration window is empty", context={"t_s": t_s, "t_e": t_e})
    if t_s < times[0] - 1e-12 or t_e > times[-1] + 1e-12:
        raise MetricsError("Integration window leaves the record", context={"t_s": t_s, "t_e": t_e, "record": (float(times[0]), float(times[-1]))})
    inside = (times > t_s) & (times < t_e)
    grid = np.concatenate([[t_s], times[inside], [t_e]])
    samples = np.concatenate([[np.interp(t_s, times, values)], values[inside], [np.interp(t_e, times, values)]])
    return float(trapezoid(samples, grid) / (t_e - t_s))


def trajectory_deviation(pair: TrajectoryPair, bounds: Tuple[float, float]) -> float:
    """Mean distance between the two trajectories over the bounds."""
    gap = np.linalg.norm(pair.human - pair.robot, axis=1)
    return window_mean(pair.times, gap, *bounds)


def velocity_difference(pair: TrajectoryPair, bounds: Tuple[float, float]) -> float:
    vh, vr = pair.velocities()
    return window_mean(pair.times, np.linalg.norm(vh - vr, axis=1), *bounds)


def avg_follower_force(wrenches: WrenchPair, bounds: Tuple[float, float]) -> float:
    """Mean of ``|f1| + |f2|`` over the bounds."""
    total = np.linalg.norm(wrenches.f1, axis=1) + np.linalg.norm(wrenches.f2, axis=1)
    return window_mean(wrenches.times, total, *bounds)
