"""Synthetic leader-follower carrying trials, logs and training windows."""

from cocarry.dyad.dataset import (
    TrainingSample,
    TrainingSet,
    build_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
    window_dataset,
)
from cocarry.dyad.kinematics import finite_diff_velocity, to_local, wrap_angle
from cocarry.dyad.logio import DyadLog, decode_log, encode_log, read_log, write_log
from cocarry.dyad.physics import (
    AdmittanceFollower,
    FrozenFollower,
    IntentFollower,
    SlavedFollower,
    coupling_wrench,
    make_follower,
    mechanical_energy,
    simulate_dyad,
    simulate_trajectory,
)
from cocarry.dyad.primitives import LeaderTrajectory, MotionPrimitive, minjerk_profile, primitive_trajectory
from cocarry.dyad.trials import TrialSpec, run_trial, trial_grid

__all__ = [
    "AdmittanceFollower",
    "DyadLog",
    "FrozenFollower",
    "IntentFollower",
    "LeaderTrajectory",
    "MotionPrimitive",
    "SlavedFollower",
    "TrainingSample",
    "TrainingSet",
    "TrialSpec",
    "build_dataset",
    "coupling_wrench",
    "decode_log",
    "encode_log",
    "finite_diff_velocity",
    "load_dataset",
    "make_follower",
    "mechanical_energy",
    "minjerk_profile",
    "primitive_trajectory",
    "read_log",
    "run_trial",
    "save_dataset",
    "simulate_dyad",
    "simulate_trajectory",
    "split_dataset",
    "to_local",
    "trial_grid",
    "window_dataset",
    "wrap_angle",
]
