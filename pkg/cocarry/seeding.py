"""Named random substreams derived from one root seed.

No module draws from a global RNG; every consumer asks for its own stream,
e.g. ``substream(seed, "dyad", trial_index)``.
"""

import hashlib
from typing import Union

import numpy as np

Name = Union[str, int]


def derive_seed(seed: int, *names: Name) -> int:
    """Hash ``(seed, *names)`` into a 128-bit integer entropy value."""
    digest = hashlib.sha256()
    digest.update(str(int(seed)).encode("utf-8"))
    for name in names:
        digest.update(b"/")
        digest.update(str(name).encode("utf-8"))
    return int.from_bytes(digest.digest()[:16], "little")


def substream(seed: int, *names: Name) -> np.random.Generator:
    """Independent generator for the given name path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(derive_seed(seed, *names))))
