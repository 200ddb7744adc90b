"""
Stationary (undecimated, a-trous) wavelet approximation pyramid.

Sequences are laid out ``(..., T, channels)``: time is the second-to-last
axis, so single windows and batches of windows go through the same code.
Each channel is filtered independently with circular boundary handling.
"""

from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import pywt

from cocarry.exceptions import WaveletError

MAX_LEVELS = 6


def _time_axis(seq: np.ndarray) -> int:
    return -2 if seq.ndim >= 2 else 0


def pad_pow2(seq: np.ndarray) -> Tuple[np.ndarray, int]:
    """Append zero rows up to the next power of two; returns (padded, original length)."""
    seq = np.asarray(seq, dtype=np.float64)
    axis = _time_axis(seq)
    length = seq.shape[axis] if seq.ndim else 0
    if length < 1:
        raise WaveletError("Cannot pad an empty sequence", context={"shape": seq.shape})
    target = 1 << (length - 1).bit_length()
    if target == length:
        return seq.copy(), length
    widths = [(0, 0)] * seq.ndim
    widths[axis] = (0, target - length)
    return np.pad(seq, widths), length


@lru_cache(maxsize=None)
def scaling_filter(wavelet: str = "haar") -> Tuple[float, ...]:
    """Low-pass taps normalized to unit sum (constants pass through unchanged)."""
    if wavelet == "haar":
        return (0.5, 0.5)
    try:
        taps = np.asarray(pywt.Wavelet(wavelet).dec_lo, dtype=np.float64)
    except ValueError:
        raise WaveletError(
            f"Unknown wavelet family '{wavelet}'",
            suggestions=["Use 'haar' or a discrete family from pywt.wavelist(kind='discrete')"],
        ) from None
    return tuple(taps / taps.sum())


def swt_approx(
    padded: np.ndarray,
    levels: int,
    length: Optional[int] = None,
    wavelet: str = "haar",
) -> List[np.ndarray]:
    """Approximation coefficients A_1..A_L of the a-trous recursion.

    ``A_l[n] = sum_k h[k] * A_{l-1}[n - k * 2**(l-1)]`` (indices taken modulo the
    padded length), starting from ``A_0 = padded``. Each level is trimmed back
    to ``length`` rows when given.
    """
    padded = np.asarray(padded, dtype=np.float64)
    axis = _time_axis(padded)
    n = padded.shape[axis]
    if n < 1 or n & (n - 1):
        raise WaveletError(
            "Transform input length must be a power of two",
            context={"length": n},
            suggestions=["Pass the sequence through pad_pow2 first"],
        )
    if levels < 1 or levels > MAX_LEVELS or (1 << levels) > n:
        raise WaveletError(
            f"Level count {levels} too large for length {n}",
            context={"levels": levels, "length": n, "max_levels": min(MAX_LEVELS, n.bit_length() - 1)},
        )
    if length is not None and not 1 <= length <= n:
        raise WaveletError("Trim length out of range", context={"length": length, "padded": n})

    taps = scaling_filter(wavelet)
    pyramid: List[np.ndarray] = []
    current = padded
    for level in range(1, levels + 1):
        hole = 1 << (level - 1)
        nxt = np.zeros_like(current)
        for k, tap in enumerate(taps):
            nxt += tap * np.roll(current, k * hole, axis=axis)
        current = nxt
        pyramid.append(current)

    if length is None:
        return pyramid
    index = [slice(None)] * padded.ndim
    index[axis] = slice(0, length)
    return [level[tuple(index)] for level in pyramid]
