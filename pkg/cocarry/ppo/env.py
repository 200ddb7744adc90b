"""
Planar payload-randomized velocity-tracking environment.

A rigid body on the floor is driven by body-frame force/torque commands. Every
field of ``ToyEnvState`` carries a leading environment axis, so one call
advances all parallel environments. Randomness comes only from per-environment
seeds: reset draws depend on ``(seed, env index, episode)`` and push draws on
``(env seed, push count)``, which keeps stepping a pure function of the state.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from cocarry.config import RandomizationConfig
from cocarry.constants import (
    ACTION_DIM,
    BASE_MASS_KG,
    ENV_DT,
    FORCE_SCALE,
    FRICTION_GAIN,
    GAIT_PERIOD_S,
    PAYLOAD_BIAS_GAIN,
    PAYLOAD_DRAG_GAIN,
    REWARD_ACTION_RATE_SCALE,
    REWARD_ALIVE,
    REWARD_LIN_SCALE,
    REWARD_SIGMA,
    REWARD_YAW_SCALE,
    TORQUE_SCALE,
)
from cocarry.exceptions import ConfigError, SimulationError
from cocarry.seeding import derive_seed, substream

# Yaw inertia of the body per kilogram, kg*m^2/kg.
YAW_INERTIA_PER_KG = 0.1

REWARD_SCALES = {
    "lin_vel_tracking": REWARD_LIN_SCALE,
    "yaw_tracking": REWARD_YAW_SCALE,
    "action_rate": REWARD_ACTION_RATE_SCALE,
    "alive": REWARD_ALIVE,
}


@dataclass
class ToyEnvState:
    """State of ``N`` independent environments.

    ``velocity`` is the body-frame twist ``(v_x, v_y, omega_z)``; ``pose`` is the
    world pose ``(x, y, theta)``.
    """

    pose: np.ndarray
    velocity: np.ndarray
    added_mass: np.ndarray
    friction: np.ndarray
    payload_force: np.ndarray
    command: np.ndarray
    prev_action: np.ndarray
    step: np.ndarray
    episode: np.ndarray
    env_seed: np.ndarray
    root_seed: int = 0
    dt: float = ENV_DT
    episode_steps: int = 1000
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def num_envs(self) -> int:
        return int(self.pose.shape[0])

    @property
    def mass(self) -> np.ndarray:
        return BASE_MASS_KG + self.added_mass

    @property
    def time(self) -> np.ndarray:
        return self.step * self.dt

    @property
    def phase(self) -> np.ndarray:
        """Normalized gait phase in ``[0, 1)``."""
        return np.mod(self.time / GAIT_PERIOD_S, 1.0)


class Observation(NamedTuple):
    actor: np.ndarray
    critic: np.ndarray


class StepResult(NamedTuple):
    state: ToyEnvState
    observation: Observation
    reward: np.ndarray
    done: np.ndarray
    terms: Dict[str, np.ndarray]


def push_every(rand: RandomizationConfig, dt: float = ENV_DT) -> int:
    """Steps between pushes."""
    return max(1, int(round(rand.push_interval_s / dt)))


def _check_ranges(rand: RandomizationConfig) -> None:
    for name in ("friction_range", "added_mass_range", "payload_force_range"):
        low, high = getattr(rand, name)
        if low > high:
            raise ConfigError(f"Range '{name}' is not well ordered", key=f"randomization.{name}")
    if BASE_MASS_KG + rand.added_mass_range[0] <= 0:
        raise ConfigError("Added mass range would make the body massless", key="randomization.added_mass_range")


def _draw_env(
    rand: RandomizationConfig,
    seed: int,
    index: int,
    episode: int,
    payload_force: Optional[float],
) -> Tuple[float, float, float, np.ndarray, int]:
    rng = substream(seed, "ppo", "env", index, episode)
    friction = rng.uniform(*rand.friction_range)
    added_mass = rng.uniform(*rand.added_mass_range)
    payload = rng.uniform(*rand.payload_force_range)
    command = np.array(
        [
            rng.uniform(-rand.command_lin_range, rand.command_lin_range),
            rng.uniform(-rand.command_lin_range, rand.command_lin_range),
            rng.uniform(-rand.command_yaw_range, rand.command_yaw_range),
        ]
    )
    if payload_force is not None:
        payload = payload_force
    elif not rand.randomize_payload:
        payload = 0.0
    return friction, added_mass, payload, command, derive_seed(seed, "ppo", "push", index, episode) % 2**63


def env_reset(
    rand: RandomizationConfig,
    seed: int,
    num_envs: int = 1,
    payload_force: Optional[float] = None,
    episode_length_s: float = 20.0,
    dt: float = ENV_DT,
) -> ToyEnvState:
    """Fresh environments with friction, added mass, payload and command sampled per environment.

    ``payload_force`` pins the payload for evaluation; with
    ``rand.randomize_payload`` off the payload is 0 N.
    """
    _check_ranges(rand)
    if num_envs < 1:
        raise ConfigError("num_envs must be at least 1", key="ppo.num_envs")
    state = ToyEnvState(
        pose=np.zeros((num_envs, 3)),
        velocity=np.zeros((num_envs, 3)),
        added_mass=np.zeros(num_envs),
        friction=np.zeros(num_envs),
        payload_force=np.zeros(num_envs),
        command=np.zeros((num_envs, 3)),
        prev_action=np.zeros((num_envs, ACTION_DIM)),
        step=np.zeros(num_envs, dtype=np.int64),
        episode=np.zeros(num_envs, dtype=np.int64),
        env_seed=np.zeros(num_envs, dtype=np.int64),
        root_seed=int(seed),
        dt=dt,
        episode_steps=max(1, int(round(episode_length_s / dt))),
    )
    state.extras["pinned_payload"] = np.array([np.nan if payload_force is None else payload_force])
    return _redraw(state, rand, np.ones(num_envs, dtype=bool))


def _redraw(state: ToyEnvState, rand: RandomizationConfig, which: np.ndarray) -> ToyEnvState:
    pinned = float(state.extras.get("pinned_payload", np.array([np.nan]))[0])
    out = replace(
        state,
        pose=state.pose.copy(),
        velocity=state.velocity.copy(),
        added_mass=state.added_mass.copy(),
        friction=state.friction.copy(),
        payload_force=state.payload_force.copy(),
        command=state.command.copy(),
        prev_action=state.prev_action.copy(),
        step=state.step.copy(),
        env_seed=state.env_seed.copy(),
        extras=dict(state.extras),
    )
    for i in np.flatnonzero(which):
        friction, added_mass, payload, command, push_seed = _draw_env(
            rand, state.root_seed, int(i), int(state.episode[i]), None if np.isnan(pinned) else pinned
        )
        out.friction[i] = friction
        out.added_mass[i] = added_mass
        out.payload_force[i] = payload
        out.command[i] = command
        out.env_seed[i] = push_seed
        out.pose[i] = 0.0
        out.velocity[i] = 0.0
        out.prev_action[i] = 0.0
        out.step[i] = 0
    return out


def reset_done(state: ToyEnvState, rand: RandomizationConfig, done: np.ndarray) -> ToyEnvState:
    """Start the next episode in every environment flagged ``done``."""
    done = np.asarray(done, dtype=bool)
    if not done.any():
        return state
    bumped = replace(state, episode=state.episode + done.astype(np.int64))
    return _redraw(bumped, rand, done)


def observe(state: ToyEnvState) -> Observation:
    """Actor ``(N, 13)`` and critic ``(N, 16)`` observations."""
    theta = state.pose[:, 2]
    phase = 2.0 * np.pi * state.phase
    actor = np.concatenate(
        [
            np.sin(theta)[:, None],
            np.cos(theta)[:, None],
            state.command,
            state.velocity,
            state.prev_action,
            np.sin(phase)[:, None],
            np.cos(phase)[:, None],
        ],
        axis=1,
    )
    privileged = np.stack([state.friction, state.payload_force, state.added_mass], axis=1)
    return Observation(actor, np.concatenate([actor, privileged], axis=1))


def compute_reward(
    state: ToyEnvState,
    action: np.ndarray,
    prev_action: np.ndarray,
    sigma: float = REWARD_SIGMA,
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Tracking reward per environment and its scaled terms (which sum to it)."""
    lin_error = np.sum((state.velocity[:, :2] - state.command[:, :2]) ** 2, axis=1)
    yaw_error = (state.velocity[:, 2] - state.command[:, 2]) ** 2
    rate = np.sum((np.asarray(action) - np.asarray(prev_action)) ** 2, axis=1)
    terms = {
        "lin_vel_tracking": REWARD_SCALES["lin_vel_tracking"] * np.exp(-lin_error / sigma),
        "yaw_tracking": REWARD_SCALES["yaw_tracking"] * np.exp(-yaw_error / sigma),
        "action_rate": REWARD_SCALES["action_rate"] * rate,
        "alive": np.full(state.num_envs, REWARD_SCALES["alive"]),
    }
    total = np.zeros(state.num_envs)
    for value in terms.values():
        total = total + value
    return total, terms


def _push_velocities(state: ToyEnvState, rand: RandomizationConfig, pushed: np.ndarray) -> np.ndarray:
    every = push_every(rand, state.dt)
    kicks = np.zeros((state.num_envs, 2))
    for i in np.flatnonzero(pushed):
        count = int(state.step[i]) // every
        rng = substream(int(state.env_seed[i]), "push", count)
        kicks[i] = rng.uniform(-rand.max_push_velocity, rand.max_push_velocity, size=2)
    return kicks


def env_step(
    state: ToyEnvState,
    action: np.ndarray,
    rand: RandomizationConfig,
    sigma: float = REWARD_SIGMA,
) -> StepResult:
    """Advance every environment by one control step.

    Actions are clamped to ``[-1, 1]`` and scaled to newtons and newton-metres.
    Friction ``-mu*c*v`` and payload drag ``-k_p*f*v`` oppose the body-frame
    twist; the payload also adds a constant lateral force ``0.05*f``. Pushes
    add a uniform velocity kick at every multiple of the push interval.
    """
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (state.num_envs, ACTION_DIM):
        raise SimulationError(
            "Action batch has the wrong shape",
            context={"expected": (state.num_envs, ACTION_DIM), "actual": action.shape},
        )
    action = np.clip(action, -1.0, 1.0)
    mass = state.mass
    inertia = YAW_INERTIA_PER_KG * mass
    damping = state.friction * FRICTION_GAIN + PAYLOAD_DRAG_GAIN * state.payload_force

    force = np.zeros((state.num_envs, 3))
    force[:, :2] = action[:, :2] * FORCE_SCALE
    force[:, 2] = action[:, 2] * TORQUE_SCALE
    force[:, :2] -= damping[:, None] * state.velocity[:, :2]
    force[:, 2] -= damping * state.velocity[:, 2]
    force[:, 1] += PAYLOAD_BIAS_GAIN * state.payload_force

    velocity = state.velocity.copy()
    velocity[:, :2] += force[:, :2] / mass[:, None] * state.dt
    velocity[:, 2] += force[:, 2] / inertia * state.dt

    step = state.step + 1
    pushed = (step % push_every(rand, state.dt) == 0) & (step > 0)
    if pushed.any():
        velocity[:, :2] += _push_velocities(replace(state, step=step), rand, pushed)

    theta = state.pose[:, 2]
    c, s = np.cos(theta), np.sin(theta)
    pose = state.pose.copy()
    pose[:, 0] += (c * velocity[:, 0] - s * velocity[:, 1]) * state.dt
    pose[:, 1] += (s * velocity[:, 0] + c * velocity[:, 1]) * state.dt
    pose[:, 2] += velocity[:, 2] * state.dt

    if not (np.all(np.isfinite(pose)) and np.all(np.isfinite(velocity))):
        raise SimulationError(
            "Environment state became non-finite",
            time=float(np.max(step) * state.dt),
            suggestions=["Check the action scale and the randomization ranges"],
        )

    new_state = replace(state, pose=pose, velocity=velocity, prev_action=action, step=step)
    reward, terms = compute_reward(new_state, action, state.prev_action, sigma)
    done = step >= state.episode_steps
    return StepResult(new_state, observe(new_state), reward, done, terms)


def tracking_error(state: ToyEnvState) -> np.ndarray:
    """Mean absolute error over the three command components, per environment."""
    return np.mean(np.abs(state.velocity - state.command), axis=1)
