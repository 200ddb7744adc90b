"""Tests for the binary artifact container."""

import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from cocarry.container import canonical_json, pack_container, read_container, unpack_container, write_container
from cocarry.exceptions import TruncationError, VersionMismatchError


@pytest.fixture
def arrays():
    return {
        "weights": np.arange(12, dtype=np.float64).reshape(3, 4),
        "labels": np.array([1, 2, 3], dtype=np.int64),
        "empty": np.zeros((0, 6)),
    }


class TestPacking:
    def test_identical_inputs_identical_bytes(self, arrays):
        reordered = dict(reversed(list(arrays.items())))
        assert pack_container(arrays, {"b": 1, "a": 2}, "demo") == pack_container(reordered, {"a": 2, "b": 1}, "demo")

    def test_magic_and_version(self, arrays):
        magic, version, _ = struct.unpack_from("<4sHI", pack_container(arrays, {}, "demo"))
        assert magic == b"CCRY"
        assert version == 1

    def test_contents_survive(self, arrays, tmp_path):
        path = write_container(tmp_path / "nested" / "a.bin", arrays, {"seed": 7}, "demo")
        loaded, meta = read_container(path, "demo")
        assert meta == {"seed": 7}
        for name, array in arrays.items():
            assert_array_equal(loaded[name], array)
            assert loaded[name].dtype == array.dtype

    def test_big_endian_input_stored_little(self):
        data = pack_container({"x": np.arange(3, dtype=">f8")}, {}, "demo")
        _, arrays, _ = unpack_container(data)
        assert arrays["x"].dtype == np.dtype("<f8")
        assert_array_equal(arrays["x"], [0.0, 1.0, 2.0])

    def test_non_finite_metadata_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})


class TestCorruption:
    def test_too_short(self):
        with pytest.raises(VersionMismatchError):
            unpack_container(b"CC")

    def test_wrong_magic(self, arrays):
        data = bytearray(pack_container(arrays, {}, "demo"))
        data[:4] = b"XXXX"
        with pytest.raises(VersionMismatchError):
            unpack_container(bytes(data))

    def test_wrong_version(self, arrays):
        data = bytearray(pack_container(arrays, {}, "demo"))
        struct.pack_into("<H", data, 4, 7)
        with pytest.raises(VersionMismatchError) as excinfo:
            unpack_container(bytes(data))
        assert excinfo.value.context["found"] == 7
        assert excinfo.value.context["expected"] == 1

    def test_header_cut_short(self, arrays):
        data = pack_container(arrays, {}, "demo")
        with pytest.raises(TruncationError):
            unpack_container(data[:20])

    def test_payload_cut_short(self, arrays):
        data = pack_container(arrays, {}, "demo")
        with pytest.raises(TruncationError) as excinfo:
            unpack_container(data[:-8])
        assert excinfo.value.context["declared"] > excinfo.value.context["found"]

    def test_wrong_kind(self, arrays, tmp_path):
        path = write_container(tmp_path / "a.bin", arrays, {}, "dataset")
        with pytest.raises(VersionMismatchError):
            read_container(path, "policy-checkpoint")
