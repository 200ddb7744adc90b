"""Undecimated wavelet conditioning for wrench windows."""

from cocarry.wavelet.blocks import ConditioningStack, encode_window, stack_blocks, unstack_blocks
from cocarry.wavelet.swt import MAX_LEVELS, pad_pow2, scaling_filter, swt_approx

__all__ = [
    "ConditioningStack",
    "MAX_LEVELS",
    "encode_window",
    "pad_pow2",
    "scaling_filter",
    "stack_blocks",
    "swt_approx",
    "unstack_blocks",
]
