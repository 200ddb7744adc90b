"""
Deterministic binary container for named float arrays.

Layout::

    b"CCRY" | version (u16 LE) | header length (u32 LE) | JSON header | array bytes

The header is canonical JSON (sorted keys, no whitespace) holding the artifact
kind, free-form metadata and the directory of arrays (name, dtype, shape,
offset, byte count). Array bytes are little-endian and written in directory
order, so identical inputs give identical files.
"""

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from cocarry.constants import CONTAINER_MAGIC, CONTAINER_VERSION
from cocarry.exceptions import TruncationError, VersionMismatchError

PathLike = Union[str, Path]
_PREFIX = struct.Struct("<4sHI")


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def pack_container(arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any], kind: str) -> bytes:
    directory = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        array = np.ascontiguousarray(arrays[name])
        dtype = array.dtype.newbyteorder("<") if array.dtype.byteorder not in ("|", "<") else array.dtype
        raw = array.astype(dtype, copy=False).tobytes(order="C")
        directory.append(
            {"name": name, "dtype": dtype.str, "shape": list(array.shape), "offset": offset, "nbytes": len(raw)}
        )
        chunks.append(raw)
        offset += len(raw)
    header = canonical_json({"kind": kind, "meta": dict(meta), "arrays": directory}).encode("utf-8")
    return _PREFIX.pack(CONTAINER_MAGIC, CONTAINER_VERSION, len(header)) + header + b"".join(chunks)


def unpack_container(data: bytes, path: Any = None) -> Tuple[str, Dict[str, np.ndarray], Dict[str, Any]]:
    """Validate the whole payload before returning anything."""
    if len(data) < _PREFIX.size:
        raise VersionMismatchError("File too short to hold a container header", path=path)
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != CONTAINER_MAGIC:
        raise VersionMismatchError("Not a cocarry container", path=path, found=repr(magic), expected=repr(CONTAINER_MAGIC))
    if version != CONTAINER_VERSION:
        raise VersionMismatchError("Unsupported container version", path=path, found=version, expected=CONTAINER_VERSION)
    body_start = _PREFIX.size + header_len
    if len(data) < body_start:
        raise TruncationError("Container header is cut short", path=path, declared=header_len, found=len(data) - _PREFIX.size)
    try:
        header = json.loads(data[_PREFIX.size : body_start].decode("utf-8"))
        directory = header["arrays"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError):
        raise VersionMismatchError("Container header is corrupted", path=path) from None

    payload = data[body_start:]
    declared = sum(int(entry["nbytes"]) for entry in directory)
    if len(payload) < declared:
        raise TruncationError("Container payload is cut short", path=path, declared=declared, found=len(payload))

    arrays: Dict[str, np.ndarray] = {}
    for entry in directory:
        start = int(entry["offset"])
        raw = payload[start : start + int(entry["nbytes"])]
        arrays[entry["name"]] = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
    return str(header.get("kind", "")), arrays, dict(header.get("meta", {}))


def write_container(path: PathLike, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any], kind: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_container(arrays, meta, kind))
    return path


def read_container(path: PathLike, kind: str = "") -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Arrays and metadata; ``kind`` (when given) must match the stored artifact kind."""
    path = Path(path)
    found, arrays, meta = unpack_container(path.read_bytes(), path)
    if kind and found != kind:
        raise VersionMismatchError("Container holds a different artifact kind", path=path, found=found, expected=kind)
    return arrays, meta
