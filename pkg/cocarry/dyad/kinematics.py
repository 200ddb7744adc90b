"""Planar pose helpers and finite-difference velocities."""

from typing import Optional

import numpy as np

from cocarry.exceptions import SimulationError

JITTER_TOLERANCE = 0.01


def wrap_angle(angle: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    angle = np.asarray(angle, dtype=np.float64)
    return angle - 2.0 * np.pi * np.ceil((angle - np.pi) / (2.0 * np.pi))


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def to_local(vectors: np.ndarray, heading: float) -> np.ndarray:
    """Express planar ``(..., 3)`` velocity rows (v_x, v_y, omega) in a frame rotated by ``heading``."""
    vectors = np.asarray(vectors, dtype=np.float64)
    c, s = np.cos(heading), np.sin(heading)
    out = vectors.copy()
    out[..., 0] = c * vectors[..., 0] + s * vectors[..., 1]
    out[..., 1] = -s * vectors[..., 0] + c * vectors[..., 1]
    return out


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def check_uniform(timestamps: np.ndarray, tolerance: float = JITTER_TOLERANCE) -> float:
    """Return the nominal step, or raise if any step deviates by more than ``tolerance``."""
    steps = np.diff(np.asarray(timestamps, dtype=np.float64))
    if steps.size == 0:
        raise SimulationError("Need at least two timestamps")
    nominal = float(np.median(steps))
    if nominal <= 0 or np.max(np.abs(steps - nominal)) > tolerance * nominal:
        worst = int(np.argmax(np.abs(steps - nominal)))
        raise SimulationError(
            "Timestamps are not uniform within tolerance",
            time=float(timestamps[worst + 1]),
            context={"nominal_step": nominal, "step": float(steps[worst]), "tolerance": tolerance},
        )
    return nominal


def finite_diff_velocity(
    poses: np.ndarray,
    dt: Optional[float] = None,
    timestamps: Optional[np.ndarray] = None,
    angular: bool = True,
) -> np.ndarray:
    """Backward differences of ``(N, k)`` pose rows.

    With ``angular`` the last column is a heading whose differences take the
    short way round. The first row repeats the second.
    """
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim == 1:
        poses = poses[:, None]
    if poses.shape[0] < 2:
        raise SimulationError("Need at least two pose samples", context={"samples": poses.shape[0]})
    if timestamps is not None:
        dt = check_uniform(timestamps)
    if dt is None or dt <= 0:
        raise SimulationError("Sample interval must be positive", context={"dt": dt})
    delta = np.diff(poses, axis=0)
    if angular:
        delta[:, -1] = wrap_angle(delta[:, -1])
    velocity = np.empty_like(poses)
    velocity[1:] = delta / dt
    velocity[0] = velocity[1]
    return velocity
