"""Leader motion primitives built from minimum-jerk profiles."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from cocarry.constants import PRIMITIVE_KINDS
from cocarry.exceptions import ConfigError, SimulationError

Scalar = Union[float, np.ndarray]

_TRANSLATION_AXES = {
    "forward": (1.0, 0.0),
    "backward": (-1.0, 0.0),
    "left": (0.0, 1.0),
    "right": (0.0, -1.0),
}


def minjerk_profile(d: float, duration: float, t: Scalar) -> Tuple[Scalar, Scalar]:
    """Position ``d*(10u^3 - 15u^4 + 6u^5)`` and its time derivative at ``u = t/duration``."""
    t_arr = np.asarray(t, dtype=np.float64)
    if duration <= 0:
        raise SimulationError("Profile duration must be positive", context={"duration": duration})
    if np.any(t_arr < -1e-12) or np.any(t_arr > duration + 1e-12):
        raise SimulationError("Profile time outside [0, duration]", context={"duration": duration})
    u = np.clip(t_arr / duration, 0.0, 1.0)
    position = d * u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    velocity = d * 30.0 * u**2 * (1.0 - u) ** 2 / duration
    if np.ndim(t) == 0:
        return float(position), float(velocity)
    return position, velocity


@dataclass(frozen=True)
class MotionPrimitive:
    kind: str
    amplitude: float
    duration: float

    def __post_init__(self) -> None:
        if self.kind not in PRIMITIVE_KINDS:
            raise ConfigError(f"Unknown motion primitive '{self.kind}'", key="kind", context={"known": PRIMITIVE_KINDS})
        if self.duration <= 0:
            raise ConfigError("Primitive duration must be positive", key="duration")
        if self.amplitude == 0:
            raise ConfigError("Primitive amplitude must be non-zero", key="amplitude")

    @property
    def is_translation(self) -> bool:
        return self.kind in _TRANSLATION_AXES

    @property
    def direction(self) -> float:
        """Rotation sense: +1 counter-clockwise, -1 clockwise."""
        return -1.0 if self.kind.endswith("-cw") else 1.0


@dataclass
class LeaderTrajectory:
    """Front-handle pose ``(x, y, theta)`` and its velocity at every simulation tick."""

    times: np.ndarray
    poses: np.ndarray
    velocities: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def hold(cls, pose: np.ndarray, duration: float, dt: float) -> "LeaderTrajectory":
        n = int(round(duration / dt)) + 1
        times = np.arange(n) * dt
        return cls(times, np.tile(np.asarray(pose, dtype=np.float64), (n, 1)), np.zeros((n, 3)), {"kind": "hold"})


def primitive_trajectory(
    primitive: MotionPrimitive,
    object_length: float = 1.0,
    dt: float = 1e-3,
    rest_before: float = 0.0,
    rest_after: float = 0.0,
    start: Optional[np.ndarray] = None,
) -> LeaderTrajectory:
    """Sample the leader handle along a primitive, padded with rests at both ends.

    Translations move along the object's initial axes. Leader-centric rotations
    turn the object about the leader handle; follower-centric rotations swing
    the leader on an arc about the initial follower handle.
    """
    start = np.array([object_length, 0.0, 0.0]) if start is None else np.asarray(start, dtype=np.float64)
    n = int(round((rest_before + primitive.duration + rest_after) / dt)) + 1
    times = np.arange(n) * dt
    local_t = np.clip(times - rest_before, 0.0, primitive.duration)
    s, s_dot = minjerk_profile(primitive.amplitude, primitive.duration, local_t)
    moving = (times >= rest_before) & (times <= rest_before + primitive.duration)
    s_dot = np.where(moving, s_dot, 0.0)

    poses = np.tile(start, (n, 1))
    velocities = np.zeros((n, 3))
    theta0 = start[2]
    if primitive.is_translation:
        ax, ay = _TRANSLATION_AXES[primitive.kind]
        c, si = np.cos(theta0), np.sin(theta0)
        wx, wy = c * ax - si * ay, si * ax + c * ay
        poses[:, 0] += wx * s
        poses[:, 1] += wy * s
        velocities[:, 0] = wx * s_dot
        velocities[:, 1] = wy * s_dot
    else:
        theta = theta0 + primitive.direction * s
        omega = primitive.direction * s_dot
        poses[:, 2] = theta
        velocities[:, 2] = omega
        if primitive.kind.startswith("follower-rot"):
            pivot = start[:2] - object_length * np.array([np.cos(theta0), np.sin(theta0)])
            poses[:, 0] = pivot[0] + object_length * np.cos(theta)
            poses[:, 1] = pivot[1] + object_length * np.sin(theta)
            velocities[:, 0] = -object_length * np.sin(theta) * omega
            velocities[:, 1] = object_length * np.cos(theta) * omega
    meta = {"kind": primitive.kind, "amplitude": primitive.amplitude, "duration": primitive.duration}
    return LeaderTrajectory(times, poses, velocities, meta)
