"""
Context managers for cocarry file operations.

Dyad logs are read and written through ``DyadLogWriter``/``DyadLogReader``;
every CLI command writes its artifacts inside an ``ArtifactDirectory`` so a
successful run leaves a manifest and a failed run leaves nothing behind.
"""

import json
from pathlib import Path
from typing import Any, List, Optional, Set, TextIO, Union

from cocarry.container import sha256_hex
from cocarry.dyad.logio import DyadLog, decode_log, encode_log
from cocarry.log import get_logger
from cocarry.types import Manifest, ManifestEntry

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


class DyadLogWriter:
    """
    Context manager writing dyad logs in the JSON-lines format.

    Usage:
        with DyadLogWriter('trial_000.jsonl') as writer:
            writer.write(log)
    """

    def __init__(self, file_path: Union[str, Path]) -> None:
        self.file_path = Path(file_path)
        self.file: Optional[TextIO] = None

    def __enter__(self) -> "DyadLogWriter":
        self.file_path.parent.mkdir(parents=True, exist_ok=True)
        self.file = self.file_path.open("w", encoding="utf-8", newline="\n")
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self.file:
            self.file.close()
            self.file = None

    def write(self, log: DyadLog) -> None:
        """Encode and write one complete log."""
        if not self.file:
            raise RuntimeError("DyadLogWriter must be used as context manager")
        self.file.write(encode_log(log))


class DyadLogReader:
    """
    Context manager reading dyad logs.

    Usage:
        with DyadLogReader('trial_000.jsonl') as reader:
            log = reader.read()

    The whole file is validated before a log is returned; a truncated or
    foreign file raises instead of yielding partial data.
    """

    def __init__(self, file_path: Union[str, Path]) -> None:
        self.file_path = Path(file_path)
        self.file: Optional[TextIO] = None

    def __enter__(self) -> "DyadLogReader":
        self.file = self.file_path.open("r", encoding="utf-8", newline="")
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self.file:
            self.file.close()
            self.file = None

    def read(self) -> DyadLog:
        if not self.file:
            raise RuntimeError("DyadLogReader must be used as context manager")
        return decode_log(self.file.read(), self.file_path)


class ArtifactDirectory:
    """
    Context manager owning the files one command writes under ``--out``.

    Usage:
        with ArtifactDirectory(out, "train-intent", seed, config_hash) as artifacts:
            save_intent_checkpoint(artifacts.path("intent.ckpt"), params, schedule)

    On a clean exit ``manifest.json`` lists every registered file with its size
    and SHA-256. When the block raises, files created inside it are removed
    and the exception propagates.
    """

    def __init__(self, root: Union[str, Path], command: str, seed: int, config_hash: str = "") -> None:
        self.root = Path(root)
        self.command = command
        self.seed = int(seed)
        self.config_hash = config_hash
        self.files: List[Path] = []
        self._existing: Set[Path] = set()
        self._active = False

    def __enter__(self) -> "ArtifactDirectory":
        self.root.mkdir(parents=True, exist_ok=True)
        self._existing = {p.resolve() for p in self.root.rglob("*") if p.is_file()}
        self._active = True
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self._active = False
        if exc_type is not None:
            self._discard()
            return
        self.write_manifest()

    def path(self, name: Union[str, Path]) -> Path:
        """Register ``name`` (relative to the root) and return its full path."""
        if not self._active:
            raise RuntimeError("ArtifactDirectory must be used as context manager")
        target = self.root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        self.track(target)
        return target

    def track(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path not in self.files:
            self.files.append(path)
        return path

    def track_all(self, paths: Any) -> None:
        for path in paths:
            self.track(path)

    def manifest(self) -> Manifest:
        entries: List[ManifestEntry] = []
        for path in sorted(self.files, key=lambda p: p.relative_to(self.root).as_posix()):
            if not path.is_file():
                continue
            data = path.read_bytes()
            entries.append({"path": path.relative_to(self.root).as_posix(), "bytes": len(data), "sha256": sha256_hex(data)})
        return {"command": self.command, "seed": self.seed, "config_hash": self.config_hash, "files": entries}

    def write_manifest(self) -> Path:
        target = self.root / MANIFEST_NAME
        target.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.debug("wrote manifest with %d files to %s", len(self.files), target)
        return target

    def _discard(self) -> None:
        removed = 0
        for path in self.files:
            if path.is_file() and path.resolve() not in self._existing:
                path.unlink()
                removed += 1
        if removed:
            logger.warning("removed %d partial artifacts from %s", removed, self.root)


__all__ = ["ArtifactDirectory", "DyadLogReader", "DyadLogWriter", "MANIFEST_NAME"]
