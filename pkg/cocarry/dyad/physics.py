"""
Planar dyad simulation.

The carried object is a rigid bar of length ``l`` held rigidly by the leader at
its front handle. The follower holds the rear handle through a planar
spring-damper; both handles carry a six-axis sensor. Wrenches are reported in
the object frame as ``(F_x, F_y, F_z, tau_x, tau_y, tau_z)``, where ``F_z`` is
the static payload share and the tilt torques are zero.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from cocarry.config import DyadConfig
from cocarry.constants import GRAVITY
from cocarry.dyad.kinematics import cross2, wrap_angle
from cocarry.dyad.logio import DyadLog
from cocarry.dyad.primitives import LeaderTrajectory, MotionPrimitive, primitive_trajectory
from cocarry.exceptions import SimulationError
from cocarry.log import get_logger
from cocarry.seeding import substream

logger = get_logger(__name__)


def handle_kinematics(leader_pose: np.ndarray, leader_vel: np.ndarray, length: float) -> Tuple[np.ndarray, np.ndarray]:
    """Rear-handle position and velocity for a leader at the front handle."""
    theta, omega = leader_pose[2], leader_vel[2]
    axis = np.array([np.cos(theta), np.sin(theta)])
    position = leader_pose[:2] - length * axis
    velocity = leader_vel[:2] + length * omega * np.array([np.sin(theta), -np.cos(theta)])
    return position, velocity


def object_pose(leader_pose: np.ndarray, length: float) -> np.ndarray:
    theta = leader_pose[..., 2]
    out = np.array(leader_pose, dtype=np.float64, copy=True)
    out[..., 0] -= 0.5 * length * np.cos(theta)
    out[..., 1] -= 0.5 * length * np.sin(theta)
    return out


@dataclass
class Coupling:
    """Handle error and handle velocity seen by the follower (world frame)."""

    error: np.ndarray
    handle_velocity: np.ndarray


def coupling_state(leader_pose: np.ndarray, leader_vel: np.ndarray, follower_pose: np.ndarray, length: float) -> Coupling:
    handle, handle_vel = handle_kinematics(leader_pose, leader_vel, length)
    error = np.array([handle[0] - follower_pose[0], handle[1] - follower_pose[1], float(wrap_angle(leader_pose[2] - follower_pose[2]))])
    return Coupling(error, np.array([handle_vel[0], handle_vel[1], leader_vel[2]]))


def coupling_wrench(
    leader_pose: np.ndarray,
    leader_vel: np.ndarray,
    follower_pose: np.ndarray,
    follower_vel: np.ndarray,
    payload: float,
    config: DyadConfig,
) -> Tuple[np.ndarray, np.ndarray]:
    """Noise-free ``(wrench1, wrench2)`` at the leader and follower handles.

    The follower feels ``F = K*e + D*(v_handle - v_follower)`` and the analogous
    rotational term; the leader feels the reaction, with the lever arm of the bar
    added to its torque.
    """
    leader_pose = np.asarray(leader_pose, dtype=np.float64)
    leader_vel = np.asarray(leader_vel, dtype=np.float64)
    follower_pose = np.asarray(follower_pose, dtype=np.float64)
    follower_vel = np.asarray(follower_vel, dtype=np.float64)
    c = coupling_state(leader_pose, leader_vel, follower_pose, config.object_length)
    force = config.stiffness * c.error[:2] + config.damping * (c.handle_velocity[:2] - follower_vel[:2])
    torque = config.rot_stiffness * c.error[2] + config.rot_damping * (c.handle_velocity[2] - follower_vel[2])

    theta = leader_pose[2]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    local = np.array([cos_t * force[0] + sin_t * force[1], -sin_t * force[0] + cos_t * force[1]])
    lever = np.array([-config.object_length, 0.0])
    support = payload * GRAVITY / 2.0

    wrench2 = np.array([local[0], local[1], support, 0.0, 0.0, torque])
    wrench1 = np.array([-local[0], -local[1], support, 0.0, 0.0, -(torque + float(cross2(lever, local)))])
    return wrench1, wrench2


def mechanical_energy(leader_pose: np.ndarray, follower_pose: np.ndarray, config: DyadConfig) -> float:
    """Spring energy stored in the handle coupling (the follower is kinematic)."""
    handle, _ = handle_kinematics(np.asarray(leader_pose, dtype=np.float64), np.zeros(3), config.object_length)
    e = handle - np.asarray(follower_pose[:2], dtype=np.float64)
    e_theta = float(wrap_angle(leader_pose[2] - follower_pose[2]))
    return 0.5 * config.stiffness * float(e @ e) + 0.5 * config.rot_stiffness * e_theta**2


# -- followers ----------------------------------------------------------------


class Follower:
    """Commands the follower's world-frame velocity ``(v_x, v_y, omega)`` each tick."""

    name = "follower"

    def reset(self) -> None:
        pass

    def velocity(self, coupling: Coupling, follower_pose: np.ndarray, tick: int, history: "WrenchHistory") -> np.ndarray:
        raise NotImplementedError


class AdmittanceFollower(Follower):
    """Velocity proportional to the sensed wrench, ``v = A * F``.

    ``F`` itself depends on ``v`` through the damper, so the loop is solved in
    closed form: ``v = A*(K*e + D*v_h) / (1 + A*D)`` per axis.
    """

    name = "admittance"

    def __init__(self, config: DyadConfig) -> None:
        self.config = config

    def velocity(self, coupling, follower_pose, tick, history):
        cfg = self.config
        e, vh = coupling.error, coupling.handle_velocity
        lin = cfg.admittance * (cfg.stiffness * e[:2] + cfg.damping * vh[:2]) / (1.0 + cfg.admittance * cfg.damping)
        rot = cfg.rot_admittance * (cfg.rot_stiffness * e[2] + cfg.rot_damping * vh[2]) / (1.0 + cfg.rot_admittance * cfg.rot_damping)
        return np.array([lin[0], lin[1], rot])


class FrozenFollower(Follower):
    name = "frozen"

    def velocity(self, coupling, follower_pose, tick, history):
        return np.zeros(3)


class SlavedFollower(Follower):
    """Tracks the rear handle exactly, so the coupling never stretches."""

    name = "slaved"

    def __init__(self, dt: float) -> None:
        self.dt = dt

    def velocity(self, coupling, follower_pose, tick, history):
        return coupling.handle_velocity + coupling.error / self.dt


class WrenchHistory:
    """Growing view of the logged (noisy) wrench stream."""

    def __init__(self, wrench1: np.ndarray, wrench2: np.ndarray) -> None:
        self._w1 = wrench1
        self._w2 = wrench2
        self.count = 0

    def window(self, length: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Last ``length`` samples as (force group, torque group), or None if too few."""
        if self.count < length:
            return None
        w1 = self._w1[self.count - length : self.count]
        w2 = self._w2[self.count - length : self.count]
        return np.concatenate([w1[:, :3], w2[:, :3]], axis=1), np.concatenate([w1[:, 3:], w2[:, 3:]], axis=1)


class IntentFollower(Follower):
    """Follows the learned intent model, re-planning on every frame tick.

    The inferred command is in the follower's local frame and is held until the
    next frame. Before a full window is available the follower stays still.
    """

    name = "intent"

    def __init__(self, predictor: Any, block_ticks: int, window: int, seed: int = 0) -> None:
        self.predictor = predictor
        self.block_ticks = block_ticks
        self.window = window
        self.seed = seed
        self._command = np.zeros(3)
        self.commands: Dict[int, np.ndarray] = {}

    def reset(self) -> None:
        self._command = np.zeros(3)
        self.commands = {}

    def velocity(self, coupling, follower_pose, tick, history):
        if tick % self.block_ticks == 0:
            window = history.window(self.window)
            if window is not None:
                self._command = np.asarray(self.predictor(window[0], window[1], self.seed + tick), dtype=np.float64)
                self.commands[tick] = self._command
        psi = follower_pose[2]
        c, s = np.cos(psi), np.sin(psi)
        local = self._command
        return np.array([c * local[0] - s * local[1], s * local[0] + c * local[1], local[2]])


def make_follower(kind: str, config: DyadConfig, dt: float) -> Follower:
    if kind == "admittance":
        return AdmittanceFollower(config)
    if kind == "frozen":
        return FrozenFollower()
    if kind == "slaved":
        return SlavedFollower(dt)
    raise SimulationError(f"Unknown built-in follower '{kind}'", context={"known": ["admittance", "frozen", "slaved"]})


# -- simulation ---------------------------------------------------------------


def simulate_trajectory(
    trajectory: LeaderTrajectory,
    follower: Follower,
    config: DyadConfig,
    payload: float,
    seed: int,
    follower_start: Optional[np.ndarray] = None,
    noise: bool = True,
    meta: Optional[Dict[str, Any]] = None,
) -> DyadLog:
    """Run the coupled system along a sampled leader trajectory.

    Semi-implicit Euler: the follower velocity is computed from the current
    state, then integrated into the next pose. Wrenches are logged every tick,
    poses every ``block_ticks`` ticks starting at tick 0.
    """
    n = len(trajectory)
    dt = 1.0 / config.wrench_rate
    block = config.block_ticks
    length = config.object_length
    rng = substream(seed, "dyad", "sensor")
    sigma = np.array([config.noise_force] * 3 + [config.noise_torque] * 3) if noise else np.zeros(6)
    noise1 = rng.standard_normal((n, 6)) * sigma
    noise2 = rng.standard_normal((n, 6)) * sigma

    wrench1 = np.zeros((n, 6))
    wrench2 = np.zeros((n, 6))
    frames = list(range(0, n, block))
    leader_frames = np.zeros((len(frames), 3))
    follower_frames = np.zeros((len(frames), 3))
    history = WrenchHistory(wrench1, wrench2)

    if follower_start is None:
        handle, _ = handle_kinematics(trajectory.poses[0], np.zeros(3), length)
        follower_start = np.array([handle[0], handle[1], trajectory.poses[0, 2]])
    pose = np.array(follower_start, dtype=np.float64)
    follower.reset()

    frame = 0
    for k in range(n):
        leader_pose, leader_vel = trajectory.poses[k], trajectory.velocities[k]
        coupling = coupling_state(leader_pose, leader_vel, pose, length)
        velocity = follower.velocity(coupling, pose, k, history)
        w1, w2 = coupling_wrench(leader_pose, leader_vel, pose, velocity, payload, config)
        wrench1[k] = w1 + noise1[k]
        wrench2[k] = w2 + noise2[k]
        history.count = k + 1
        if frame < len(frames) and frames[frame] == k:
            leader_frames[frame] = leader_pose
            follower_frames[frame] = pose
            frame += 1
        pose = pose + velocity * dt
        if not np.all(np.isfinite(pose)) or np.max(np.abs(pose[:2])) > config.instability_bound:
            raise SimulationError(
                "Follower left the stability bound",
                time=float(trajectory.times[k]),
                context={"pose": pose.tolist(), "bound": config.instability_bound, "follower": follower.name},
                suggestions=["Lower the follower gain or raise the damping"],
            )

    log_meta = dict(trajectory.meta)
    log_meta.update({"payload": payload, "seed": seed, "follower": follower.name})
    log_meta.update(meta or {})
    return DyadLog(
        wrench_t=trajectory.times.copy(),
        wrench1=wrench1,
        wrench2=wrench2,
        frame_t=trajectory.times[frames].copy(),
        leader=leader_frames,
        follower=follower_frames,
        object=object_pose(leader_frames, length),
        meta=log_meta,
    )


def simulate_dyad(
    primitive: MotionPrimitive,
    follower: Follower,
    config: DyadConfig,
    payload: float,
    seed: int,
    noise: bool = True,
    meta: Optional[Dict[str, Any]] = None,
) -> DyadLog:
    """Simulate one trial of ``primitive`` with rests before and after the motion."""
    trajectory = primitive_trajectory(
        primitive,
        object_length=config.object_length,
        dt=1.0 / config.wrench_rate,
        rest_before=config.rest_before,
        rest_after=config.rest_after,
    )
    log = simulate_trajectory(trajectory, follower, config, payload, seed, noise=noise, meta=meta)
    logger.debug("simulated %s payload=%.1f kg follower=%s (%d ticks)", primitive.kind, payload, follower.name, len(trajectory))
    return log

