"""
Training windows cut from dyad logs.

A frame ``j`` yields a sample when at least ``T = H*S`` wrench samples carry a
timestamp ``<= t_frame[j]`` and frames ``j+1..j+H`` exist. The window is the
last ``T`` of those wrench samples; the label is the follower's finite-difference
velocity at frames ``j+1..j+H``, expressed in the follower frame at frame ``j``.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from cocarry.constants import BLOCK_SIZE, CHANNELS, HORIZON, PRIMITIVE_KINDS, VELOCITY_DIMS
from cocarry.container import read_container, write_container
from cocarry.dyad.kinematics import finite_diff_velocity, to_local
from cocarry.dyad.logio import DyadLog
from cocarry.seeding import substream

DATASET_KIND = "dataset"


class TrainingSample(NamedTuple):
    force: np.ndarray
    torque: np.ndarray
    velocities: np.ndarray


@dataclass
class TrainingSet:
    """Stacked samples with per-sample trial bookkeeping."""

    force: np.ndarray
    torque: np.ndarray
    velocities: np.ndarray
    trial: np.ndarray
    kind: np.ndarray
    payload: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.velocities.shape[0])

    def __getitem__(self, index: int) -> TrainingSample:
        return TrainingSample(self.force[index], self.torque[index], self.velocities[index])

    def subset(self, index: np.ndarray) -> "TrainingSet":
        return TrainingSet(
            self.force[index],
            self.torque[index],
            self.velocities[index],
            self.trial[index],
            self.kind[index],
            self.payload[index],
            dict(self.meta),
        )

    @classmethod
    def empty(cls, window: int = HORIZON * BLOCK_SIZE, horizon: int = HORIZON) -> "TrainingSet":
        return cls(
            np.zeros((0, window, CHANNELS)),
            np.zeros((0, window, CHANNELS)),
            np.zeros((0, horizon, VELOCITY_DIMS)),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0),
        )


def window_dataset(
    log: DyadLog,
    horizon: int = HORIZON,
    block: int = BLOCK_SIZE,
    stride: int = 1,
    trial: int = 0,
) -> TrainingSet:
    """Every usable frame (every ``stride``-th one) of a single log; too-short logs give an empty set."""
    window = horizon * block
    n_frames = len(log.frame_t)
    empty = TrainingSet.empty(window, horizon)
    if n_frames < horizon + 1 or len(log.wrench_t) < window:
        return empty

    counts = np.searchsorted(log.wrench_t, log.frame_t, side="right")
    usable = [j for j in range(0, n_frames - horizon) if counts[j] >= window][::stride]
    if not usable:
        return empty

    velocity = finite_diff_velocity(log.follower, timestamps=log.frame_t)
    force, torque = log.force, log.torque
    forces, torques, labels = [], [], []
    for j in usable:
        end = counts[j]
        forces.append(force[end - window : end])
        torques.append(torque[end - window : end])
        labels.append(to_local(velocity[j + 1 : j + 1 + horizon], log.follower[j, 2]))

    kind = log.meta.get("kind")
    kind_index = PRIMITIVE_KINDS.index(kind) if kind in PRIMITIVE_KINDS else -1
    size = len(usable)
    return TrainingSet(
        np.stack(forces),
        np.stack(torques),
        np.stack(labels),
        np.full(size, trial, dtype=np.int64),
        np.full(size, kind_index, dtype=np.int64),
        np.full(size, float(log.meta.get("payload", 0.0))),
    )


def concat_sets(sets: Sequence[TrainingSet], meta: Optional[Dict[str, Any]] = None) -> TrainingSet:
    sets = [s for s in sets if len(s)]
    if not sets:
        out = TrainingSet.empty()
    else:
        out = TrainingSet(*(np.concatenate([getattr(s, name) for s in sets]) for name in _ARRAYS))
    out.meta = dict(meta or {})
    return out


def build_dataset(
    logs: Iterable[DyadLog],
    horizon: int = HORIZON,
    block: int = BLOCK_SIZE,
    stride: int = 1,
    meta: Optional[Dict[str, Any]] = None,
) -> TrainingSet:
    """Window every log; the log's ``trial`` metadata (or its position) labels the samples."""
    sets = [
        window_dataset(log, horizon, block, stride, trial=int(log.meta.get("trial", i)))
        for i, log in enumerate(logs)
    ]
    return concat_sets(sets, meta)


def split_dataset(data: TrainingSet, holdout_fraction: float, seed: int) -> Tuple[TrainingSet, TrainingSet]:
    """Split by whole trials so no trial contributes to both sides."""
    trials = np.unique(data.trial)
    if holdout_fraction <= 0 or len(trials) < 2:
        return data, data.subset(np.zeros(len(data), dtype=bool))
    order = substream(seed, "dataset", "split").permutation(trials)
    n_hold = min(len(trials) - 1, max(1, int(round(holdout_fraction * len(trials)))))
    held = np.isin(data.trial, order[:n_hold])
    return data.subset(~held), data.subset(held)


_ARRAYS = ("force", "torque", "velocities", "trial", "kind", "payload")


def save_dataset(path: Union[str, Path], data: TrainingSet) -> Path:
    return write_container(path, {name: getattr(data, name) for name in _ARRAYS}, data.meta, DATASET_KIND)


def load_dataset(path: Union[str, Path]) -> TrainingSet:
    arrays, meta = read_container(path, DATASET_KIND)
    return TrainingSet(*(arrays[name] for name in _ARRAYS), meta=meta)


def samples(data: TrainingSet) -> List[TrainingSample]:
    return [data[i] for i in range(len(data))]
