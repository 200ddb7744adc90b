"""Type definitions shared across cocarry."""

from typing import Dict, List, Literal, Optional, TypedDict

FollowerKind = Literal["admittance", "frozen", "slaved", "intent"]
Command = Literal["gen-data", "train-intent", "infer", "rollout", "train-ppo", "eval-ppo", "metrics", "reproduce"]

Pose = List[float]  # (x, y, theta)
Wrench = List[float]  # (F_x, F_y, F_z, tau_x, tau_y, tau_z)


class LogHeader(TypedDict):
    """First line of a dyad log."""

    format: str
    version: int
    records: int
    meta: Dict[str, object]


class LogRecord(TypedDict):
    """One time-merged dyad log line; poses only on frame ticks."""

    t: float
    leader: Optional[Pose]
    follower: Optional[Pose]
    object: Optional[Pose]
    w1: Optional[Wrench]
    w2: Optional[Wrench]


class ManifestEntry(TypedDict):
    path: str  # relative to the run directory
    bytes: int
    sha256: str


class Manifest(TypedDict):
    """``manifest.json`` written next to every run's artifacts."""

    command: str
    seed: int
    config_hash: str
    files: List[ManifestEntry]


class IntentScores(TypedDict):
    mse: float
    baseline_mse: float
    mse_ratio: float
    sign_agreement: float
    samples: float
    moving_translation_samples: float


class TrackingScores(TypedDict):
    payload_force: float
    episodes: float
    tracking_error: float
    tracking_error_std: float
    mean_reward: float
