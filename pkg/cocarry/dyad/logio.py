"""
In-memory dyad logs and their JSON-lines file format.

The first line is a header ``{"format", "version", "records", "meta"}``.
Every following line is one time-merged record::

    {"t": ..., "leader": [x, y, theta] | null, "follower": ..., "object": ...,
     "w1": [6] | null, "w2": [6] | null}

Pose fields are present on frame ticks only; wrench fields may be null on
frame-only records. Reading validates the whole file before building a log.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from cocarry.constants import LOG_FORMAT, LOG_VERSION
from cocarry.exceptions import TruncationError, VersionMismatchError
from cocarry.types import LogHeader, LogRecord

POSE_FIELDS = ("leader", "follower", "object")


@dataclass
class DyadLog:
    """Wrench stream at the sensor rate plus pose frames at the camera rate."""

    wrench_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    wrench1: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    wrench2: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    frame_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    leader: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    follower: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    object: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def force(self) -> np.ndarray:
        """Force group ``(N, 6)``: both sensors' three force axes."""
        return np.concatenate([self.wrench1[:, :3], self.wrench2[:, :3]], axis=1)

    @property
    def torque(self) -> np.ndarray:
        return np.concatenate([self.wrench1[:, 3:], self.wrench2[:, 3:]], axis=1)

    @property
    def duration(self) -> float:
        ends = [a[-1] for a in (self.wrench_t, self.frame_t) if len(a)]
        return float(max(ends)) if ends else 0.0

    def equals(self, other: "DyadLog") -> bool:
        """Bit-exact comparison of every array and the metadata."""
        arrays = ("wrench_t", "wrench1", "wrench2", "frame_t", *POSE_FIELDS)
        return self.meta == other.meta and all(
            getattr(self, name).shape == getattr(other, name).shape
            and getattr(self, name).tobytes() == getattr(other, name).tobytes()
            for name in arrays
        )


def _row(array: np.ndarray, index: Optional[int]) -> Optional[List[float]]:
    return None if index is None else [float(v) for v in array[index]]


def encode_log(log: DyadLog) -> str:
    """Serialize to JSON lines, merging wrench and frame samples that share a timestamp."""
    wrench_index = {float(t): i for i, t in enumerate(log.wrench_t)}
    frame_index = {float(t): i for i, t in enumerate(log.frame_t)}
    times = sorted(set(wrench_index) | set(frame_index))
    header: LogHeader = {"format": LOG_FORMAT, "version": LOG_VERSION, "records": len(times), "meta": log.meta}
    lines = [json.dumps(header, sort_keys=True, allow_nan=False)]
    for t in times:
        wi, fi = wrench_index.get(t), frame_index.get(t)
        record: LogRecord = {
            "t": t,
            "leader": _row(log.leader, fi),
            "follower": _row(log.follower, fi),
            "object": _row(log.object, fi),
            "w1": _row(log.wrench1, wi),
            "w2": _row(log.wrench2, wi),
        }
        lines.append(json.dumps(record, allow_nan=False))
    return "\n".join(lines) + "\n"


def decode_log(text: str, path: Any = None) -> DyadLog:
    lines = text.split("\n")
    truncated_tail = bool(lines) and lines[-1] != ""
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise VersionMismatchError("Log file is empty", path=path)
    try:
        header = json.loads(lines[0])
    except ValueError:
        raise VersionMismatchError("Log header is not valid JSON", path=path) from None
    if not isinstance(header, dict) or header.get("format") != LOG_FORMAT:
        raise VersionMismatchError(
            "Not a dyad log", path=path, found=header.get("format") if isinstance(header, dict) else None, expected=LOG_FORMAT
        )
    if header.get("version") != LOG_VERSION:
        raise VersionMismatchError("Unsupported log version", path=path, found=header.get("version"), expected=LOG_VERSION)
    declared = int(header.get("records", -1))

    body = lines[1:]
    records = []
    for number, line in enumerate(body, start=2):
        try:
            records.append(json.loads(line))
        except ValueError:
            if number == len(body) + 1 and truncated_tail:
                raise TruncationError("Last log record is cut short", path=path, declared=declared, found=len(records)) from None
            raise VersionMismatchError("Corrupted log record", path=path, context={"line": number}) from None
    if len(records) < declared:
        raise TruncationError("Log ends before the declared record count", path=path, declared=declared, found=len(records))
    if len(records) > declared:
        raise VersionMismatchError("Log holds more records than declared", path=path, found=len(records), expected=declared)

    wrench_t, w1, w2 = [], [], []
    frame_t: List[float] = []
    poses: Dict[str, List[List[float]]] = {name: [] for name in POSE_FIELDS}
    try:
        for record in records:
            t = float(record["t"])
            if record.get("w1") is not None:
                wrench_t.append(t)
                w1.append(record["w1"])
                w2.append(record["w2"])
            if record.get("leader") is not None:
                frame_t.append(t)
                for name in POSE_FIELDS:
                    poses[name].append(record[name])
        log = DyadLog(
            wrench_t=np.asarray(wrench_t, dtype=np.float64),
            wrench1=np.asarray(w1, dtype=np.float64).reshape(-1, 6),
            wrench2=np.asarray(w2, dtype=np.float64).reshape(-1, 6),
            frame_t=np.asarray(frame_t, dtype=np.float64),
            meta=dict(header.get("meta", {})),
            **{name: np.asarray(poses[name], dtype=np.float64).reshape(-1, 3) for name in POSE_FIELDS},
        )
    except (KeyError, TypeError, ValueError):
        raise VersionMismatchError("Log record has missing or malformed fields", path=path) from None
    return log


def write_log(path: Union[str, Path], log: DyadLog) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(encode_log(log), encoding="utf-8")
    return path


def read_log(path: Union[str, Path]) -> DyadLog:
    path = Path(path)
    return decode_log(path.read_text(encoding="utf-8"), path)
