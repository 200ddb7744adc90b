"""Tests for the stationary wavelet encoder and block reshaping."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cocarry.constants import BLOCK_SIZE, HORIZON, WINDOW_LENGTH
from cocarry.exceptions import WaveletError
from cocarry.seeding import substream
from cocarry.wavelet.blocks import encode_window, stack_blocks, unstack_blocks
from cocarry.wavelet.swt import pad_pow2, scaling_filter, swt_approx


class TestPadPow2:
    def test_window_pads_to_256(self):
        padded, length = pad_pow2(np.ones((WINDOW_LENGTH, 6)))
        assert padded.shape == (256, 6)
        assert length == 198
        assert_array_equal(padded[198:], 0.0)
        assert_array_equal(padded[:198], 1.0)

    def test_power_of_two_unchanged(self):
        seq = substream(0, "pad").normal(size=(256, 6))
        padded, length = pad_pow2(seq)
        assert length == 256
        assert_array_equal(padded, seq)

    def test_single_sample(self):
        padded, length = pad_pow2(np.array([[3.0] * 6]))
        assert padded.shape == (1, 6) and length == 1

    def test_empty_rejected(self):
        with pytest.raises(WaveletError):
            pad_pow2(np.zeros((0, 6)))

    def test_batch_pads_time_axis(self):
        padded, _ = pad_pow2(np.ones((4, 100, 6)))
        assert padded.shape == (4, 128, 6)


class TestSwtApprox:
    def test_constant_preserved_at_every_level(self):
        pyramid = swt_approx(np.full((64, 6), 2.5), 4)
        for level in pyramid:
            assert_allclose(level, 2.5, atol=1e-15)

    def test_impulse_level_one(self):
        x = np.zeros(16)
        x[4] = 1.0
        (a1,) = swt_approx(x, 1)
        expected = np.zeros(16)
        expected[4] = expected[5] = 0.5
        assert_array_equal(a1, expected)

    def test_impulse_level_two_uses_holes(self):
        x = np.zeros(16)
        x[0] = 1.0
        _, a2 = swt_approx(x, 2)
        expected = np.zeros(16)
        expected[[0, 1, 2, 3]] = 0.25
        assert_array_equal(a2, expected)

    def test_circular_wraparound(self):
        x = np.zeros(8)
        x[7] = 1.0
        (a1,) = swt_approx(x, 1)
        assert a1[0] == 0.5 and a1[7] == 0.5

    @pytest.mark.parametrize("levels", [1, 2, 3, 4])
    def test_shape_preserved_and_trimmed(self, levels):
        padded, length = pad_pow2(substream(levels, "shape").normal(size=(WINDOW_LENGTH, 6)))
        pyramid = swt_approx(padded, levels, length)
        assert len(pyramid) == levels
        assert all(level.shape == (WINDOW_LENGTH, 6) for level in pyramid)

    def test_too_many_levels(self):
        with pytest.raises(WaveletError):
            swt_approx(np.zeros((8, 6)), 4)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(WaveletError):
            swt_approx(np.zeros((12, 6)), 1)

    def test_unknown_family(self):
        with pytest.raises(WaveletError):
            scaling_filter("not-a-wavelet")

    def test_other_family_preserves_constants(self):
        assert sum(scaling_filter("db2")) == pytest.approx(1.0)
        for level in swt_approx(np.full((32, 2), -1.5), 3, wavelet="db2"):
            assert_allclose(level, -1.5, atol=1e-12)


class TestProperties:
    """Randomized checks over 100 signals per property."""

    @pytest.mark.parametrize("levels", [1, 2, 3, 4])
    def test_linearity(self, levels):
        rng = substream(levels, "linearity")
        for _ in range(100):
            x, z = rng.normal(size=(2, 64, 6))
            a, b = rng.normal(size=2)
            lhs = swt_approx(a * x + b * z, levels)
            rhs = [a * px + b * pz for px, pz in zip(swt_approx(x, levels), swt_approx(z, levels))]
            for left, right in zip(lhs, rhs):
                assert_allclose(left, right, atol=1e-12)

    @pytest.mark.parametrize("levels", [1, 2, 3, 4])
    def test_circular_shift_equivariance(self, levels):
        rng = substream(levels, "shift")
        for _ in range(100):
            x = rng.normal(size=(64, 6))
            k = int(rng.integers(0, 64))
            shifted = swt_approx(np.roll(x, k, axis=0), levels)
            for level, moved in zip(swt_approx(x, levels), shifted):
                assert_array_equal(np.roll(level, k, axis=0), moved)

    def test_variance_decreases_with_level(self):
        """White noise loses variance at every coarser level."""
        variances = np.zeros((100, 4))
        for seed in range(100):
            noise = substream(seed, "white").normal(size=(256, 6))
            variances[seed] = [level.var() for level in swt_approx(noise, 4)]
        mean_var = variances.mean(axis=0)
        assert np.all(np.diff(mean_var) < 0)


class TestBlocks:
    def _levels(self, levels=4):
        rng = substream(7, "blocks")
        return [rng.normal(size=(WINDOW_LENGTH, 6)) for _ in range(levels)]

    def test_first_and_last_index(self):
        force = self._levels()
        stack = stack_blocks(force, force)
        assert stack.force.shape == (HORIZON, BLOCK_SIZE, 4, 6)
        for level in range(4):
            assert_array_equal(stack.force[0, 0, level], force[level][0])
            assert_array_equal(stack.force[5, 32, level], force[level][197])

    def test_exhaustive_indexing(self):
        force = self._levels(2)
        stack = stack_blocks(force, force)
        for h in range(HORIZON):
            for s in range(BLOCK_SIZE):
                for level in range(2):
                    assert_array_equal(stack.force[h, s, level], force[level][h * BLOCK_SIZE + s])

    def test_unstack_inverts_stack(self):
        force = self._levels()
        for original, restored in zip(force, unstack_blocks(stack_blocks(force, force).force)):
            assert_array_equal(original, restored)

    def test_indivisible_length(self):
        with pytest.raises(WaveletError):
            stack_blocks([np.zeros((100, 6))], [np.zeros((100, 6))])

    def test_level_count_mismatch(self):
        with pytest.raises(WaveletError):
            stack_blocks(self._levels(2), self._levels(3))

    def test_encode_window_batch_matches_single(self):
        rng = substream(9, "encode")
        force = rng.normal(size=(3, WINDOW_LENGTH, 6))
        torque = rng.normal(size=(3, WINDOW_LENGTH, 6))
        batch = encode_window(force, torque, 4)
        assert batch.force.shape == (3, HORIZON, BLOCK_SIZE, 4, 6)
        assert batch.levels == 4
        single = encode_window(force[1], torque[1], 4)
        assert_allclose(batch.force[1], single.force, atol=1e-15)
        assert_allclose(batch.torque[1], single.torque, atol=1e-15)
