"""PPO on a planar payload-randomized velocity-tracking environment."""

from cocarry.ppo.actuator import pd_torque, simulate_pd_joint
from cocarry.ppo.algorithm import (
    Rollout,
    UpdateStats,
    approx_kl,
    compute_gae,
    normalize_advantages,
    ppo_loss_graph,
    ppo_update,
    surrogate_terms,
    value_terms,
)
from cocarry.ppo.env import (
    Observation,
    StepResult,
    ToyEnvState,
    compute_reward,
    env_reset,
    env_step,
    observe,
    reset_done,
    tracking_error,
)
from cocarry.ppo.policy import (
    GaussianPolicy,
    PolicySpec,
    init_policy,
    load_policy_checkpoint,
    policy_forward,
    save_policy_checkpoint,
)
from cocarry.ppo.training import collect_rollout, evaluate_tracking, train_ppo

__all__ = [
    "GaussianPolicy",
    "Observation",
    "PolicySpec",
    "Rollout",
    "StepResult",
    "ToyEnvState",
    "UpdateStats",
    "approx_kl",
    "collect_rollout",
    "compute_gae",
    "compute_reward",
    "env_reset",
    "env_step",
    "evaluate_tracking",
    "init_policy",
    "load_policy_checkpoint",
    "normalize_advantages",
    "observe",
    "pd_torque",
    "policy_forward",
    "ppo_loss_graph",
    "ppo_update",
    "reset_done",
    "save_policy_checkpoint",
    "simulate_pd_joint",
    "surrogate_terms",
    "tracking_error",
    "train_ppo",
    "value_terms",
]
