"""Block reshaping of approximation pyramids into conditioning stacks."""

from typing import List, NamedTuple, Sequence

import numpy as np

from cocarry.constants import BLOCK_SIZE, HORIZON
from cocarry.exceptions import WaveletError
from cocarry.wavelet.swt import pad_pow2, swt_approx


class ConditioningStack(NamedTuple):
    """Force and torque blocks, each shaped ``(..., H, S, L, D)``."""

    force: np.ndarray
    torque: np.ndarray

    @property
    def levels(self) -> int:
        return int(self.force.shape[-2])


def _blocks(levels: Sequence[np.ndarray], horizon: int, block: int) -> np.ndarray:
    stacked = np.stack([np.asarray(level, dtype=np.float64) for level in levels], axis=-2)
    length = stacked.shape[-3]
    if length != horizon * block:
        raise WaveletError(
            f"Sequence length {length} does not split into {horizon} blocks of {block}",
            context={"length": length, "horizon": horizon, "block": block},
        )
    return stacked.reshape(stacked.shape[:-3] + (horizon, block) + stacked.shape[-2:])


def stack_blocks(
    force_levels: Sequence[np.ndarray],
    torque_levels: Sequence[np.ndarray],
    horizon: int = HORIZON,
    block: int = BLOCK_SIZE,
) -> ConditioningStack:
    """``blocks[h, s, l, d] == levels[l][h * S + s, d]`` for both groups."""
    if len(force_levels) != len(torque_levels) or not force_levels:
        raise WaveletError(
            "Force and torque pyramids need the same, non-zero level count",
            context={"force_levels": len(force_levels), "torque_levels": len(torque_levels)},
        )
    return ConditioningStack(
        _blocks(force_levels, horizon, block),
        _blocks(torque_levels, horizon, block),
    )


def unstack_blocks(blocks: np.ndarray) -> List[np.ndarray]:
    """Inverse of the block reshape: one ``(..., T, D)`` array per level."""
    shape = blocks.shape
    flat = blocks.reshape(shape[:-4] + (shape[-4] * shape[-3],) + shape[-2:])
    return [flat[..., level, :] for level in range(shape[-2])]


def encode_window(
    force: np.ndarray,
    torque: np.ndarray,
    levels: int,
    horizon: int = HORIZON,
    block: int = BLOCK_SIZE,
    wavelet: str = "haar",
) -> ConditioningStack:
    """pad -> transform -> trim -> block reshape for one window or a batch."""
    force_padded, length = pad_pow2(force)
    torque_padded, _ = pad_pow2(torque)
    return stack_blocks(
        swt_approx(force_padded, levels, length, wavelet),
        swt_approx(torque_padded, levels, length, wavelet),
        horizon,
        block,
    )
