"""On-disk formats: weight stores, raw tensors, netpbm images. All integers
little-endian; golden fixtures pin the byte layout."""
import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dabnet.errors import DataError, FormatError, ShapeError, TruncationError
from dabnet.model_io import (
    load_image_ppm, load_labels_pgm, load_tensor, load_weights, preprocess,
    save_image_ppm, save_labels_pgm, save_tensor, save_weights,
)
from dabnet.net import WeightStore
from dabnet.tensor import Rng, Tensor
from conftest import rand_tensor

GOLDEN_SHA = {
    "golden.dabw":
        "7960d45caa761b3569eb786ac13b6ef7e3e00b065ed8e3c22d468c2f3bc2fddc",
    "golden_label.pgm":
        "367989bb50ae49c88d65bd5a13fef855d8727451dc25c82e9e7f272f91536402",
    "golden_image.ppm":
        "2c2689b5727f7e04e475537eef0f4d60e33e69790cc075a324d5b8111da84921",
}

name_st = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz0123456789._", min_size=1, max_size=24)


def checksum(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ===========================================================================
# weight stores
# ===========================================================================

class TestWeightFile:
    @given(data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_round_trip_any_store(self, data, tmp_path_factory):
        names = data.draw(st.lists(name_st, min_size=0, max_size=6,
                                   unique=True))
        seed = data.draw(st.integers(0, 2**32))
        rng = Rng(seed)
        store = WeightStore()
        for name in names:
            ndim = data.draw(st.integers(1, 4))
            dims = tuple(data.draw(st.integers(1, 4)) for _ in range(ndim))
            store.put(name, rng.uniform(int(np.prod(dims)), -2.0, 2.0)
                      .reshape(dims))
        path = tmp_path_factory.mktemp("wf") / "store.dabw"
        save_weights(store, path)
        loaded = load_weights(path)
        assert list(loaded.names()) == names
        for name in names:
            assert np.array_equal(loaded.get(name), store.get(name))
            assert loaded.get(name).dtype == np.float32

    def test_empty_store_is_twelve_bytes(self, tmp_path):
        path = tmp_path / "empty.dabw"
        save_weights(WeightStore(), path)
        raw = path.read_bytes()
        assert raw == b"DABW" + struct.pack("<II", 1, 0)
        assert list(load_weights(path).names()) == []

    def test_golden_fixture(self, data_dir, tmp_path):
        path = data_dir / "golden.dabw"
        assert checksum(path) == GOLDEN_SHA["golden.dabw"]
        store = load_weights(path)
        assert list(store.names()) == ["alpha.weight", "alpha.bias",
                                       "norm.gamma"]
        assert store.get("alpha.weight").shape == (2, 1, 3, 3)
        assert np.array_equal(
            store.get("alpha.weight").ravel(),
            (np.arange(18) * 0.125).astype(np.float32))
        assert np.array_equal(store.get("alpha.bias"), [-1.5, 2.75])
        # the writer must reproduce the hand-assembled bytes exactly
        out = tmp_path / "rt.dabw"
        save_weights(store, out)
        assert out.read_bytes() == path.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.dabw"
        path.write_bytes(b"WBAD" + struct.pack("<II", 1, 0))
        with pytest.raises(FormatError, match="magic"):
            load_weights(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "bad.dabw"
        path.write_bytes(b"DABW" + struct.pack("<II", 2, 0))
        with pytest.raises(FormatError, match="version"):
            load_weights(path)

    def test_unknown_dtype_byte_rejected(self, tmp_path):
        entry = struct.pack("<H", 1) + b"x" + bytes([1, 1]) \
            + struct.pack("<I", 1) + struct.pack("<f", 0.0)
        path = tmp_path / "bad.dabw"
        path.write_bytes(b"DABW" + struct.pack("<II", 1, 1) + entry)
        with pytest.raises(FormatError, match="dtype"):
            load_weights(path)

    def test_truncated_payload_rejected(self, tmp_path):
        entry = struct.pack("<H", 1) + b"x" + bytes([0, 1]) \
            + struct.pack("<I", 2) + struct.pack("<f", 0.0)  # promises 2 floats
        path = tmp_path / "bad.dabw"
        path.write_bytes(b"DABW" + struct.pack("<II", 1, 1) + entry)
        with pytest.raises(TruncationError):
            load_weights(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "bad.dabw"
        path.write_bytes(b"DABW" + struct.pack("<II", 1, 0) + b"\x00")
        with pytest.raises(FormatError, match="trailing"):
            load_weights(path)

    def test_duplicate_entry_rejected(self, tmp_path):
        entry = struct.pack("<H", 1) + b"x" + bytes([0, 1]) \
            + struct.pack("<I", 1) + struct.pack("<f", 0.0)
        path = tmp_path / "bad.dabw"
        path.write_bytes(b"DABW" + struct.pack("<II", 1, 2) + entry + entry)
        with pytest.raises(FormatError, match="duplicate"):
            load_weights(path)

    def test_missing_file_is_os_error(self, tmp_path):
        with pytest.raises(OSError):
            load_weights(tmp_path / "absent.dabw")


# ===========================================================================
# raw tensors
# ===========================================================================

class TestTensorFile:
    @given(dims=st.tuples(st.integers(1, 3), st.integers(1, 4),
                          st.integers(1, 5), st.integers(1, 5)),
           seed=st.integers(0, 10**6))
    @settings(max_examples=25, deadline=None)
    def test_round_trip(self, dims, seed, tmp_path_factory):
        t = rand_tensor(Rng(seed), dims)
        path = tmp_path_factory.mktemp("tf") / "t.tns"
        save_tensor(t, path)
        back = load_tensor(path)
        assert back.dims == dims
        assert np.array_equal(back.data, t.data)

    def test_header_layout(self, tmp_path):
        t = Tensor(np.array([1.5], np.float32).reshape(1, 1, 1, 1))
        path = tmp_path / "t.tns"
        save_tensor(t, path)
        raw = path.read_bytes()
        assert raw[:4] == b"TNS1"
        assert struct.unpack("<4I", raw[4:20]) == (1, 1, 1, 1)
        assert struct.unpack("<f", raw[20:]) == (1.5,)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "t.tns"
        path.write_bytes(b"TNS1" + struct.pack("<4I", 1, 1, 1, 2)
                         + struct.pack("<f", 0.0))
        with pytest.raises(TruncationError):
            load_tensor(path)


# ===========================================================================
# netpbm images and label maps
# ===========================================================================

class TestPgm:
    @given(seed=st.integers(0, 10**6), h=st.integers(1, 8), w=st.integers(1, 8))
    @settings(max_examples=30, deadline=None)
    def test_round_trip(self, seed, h, w, tmp_path_factory):
        labels = np.random.default_rng(seed).integers(0, 256, (h, w)) \
            .astype(np.uint8)
        path = tmp_path_factory.mktemp("pgm") / "m.pgm"
        save_labels_pgm(labels, path)
        assert np.array_equal(load_labels_pgm(path), labels)

    def test_golden_fixture(self, data_dir):
        path = data_dir / "golden_label.pgm"
        assert checksum(path) == GOLDEN_SHA["golden_label.pgm"]
        labels = load_labels_pgm(path)
        assert labels.shape == (4, 6)
        assert labels[0].tolist() == [0, 1, 2, 3, 18, 255]
        assert labels[3].tolist() == [4] * 6

    def test_comments_and_whitespace_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5 # inline\n# a full comment line\n 2\t1 \n255\n"
                         + bytes([7, 9]))
        assert load_labels_pgm(path).tolist() == [[7, 9]]

    def test_rank_four_label_tensor_accepted(self, tmp_path):
        labels = np.arange(6).reshape(1, 1, 2, 3)
        path = tmp_path / "m.pgm"
        save_labels_pgm(labels, path)
        assert np.array_equal(load_labels_pgm(path),
                              labels.reshape(2, 3).astype(np.uint8))

    def test_out_of_range_labels_rejected(self, tmp_path):
        with pytest.raises(DataError):
            save_labels_pgm(np.array([[0, 300]]), tmp_path / "m.pgm")
        with pytest.raises(DataError):
            save_labels_pgm(np.array([[-1, 0]]), tmp_path / "m.pgm")

    def test_wrong_maxval_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n127\n\x00")
        with pytest.raises(FormatError, match="maxval"):
            load_labels_pgm(path)

    def test_truncated_pixels_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x01\x02")
        with pytest.raises(TruncationError):
            load_labels_pgm(path)


class TestPpm:
    @given(seed=st.integers(0, 10**6), h=st.integers(1, 6), w=st.integers(1, 6))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_through_unit_scale(self, seed, h, w, tmp_path_factory):
        raw = np.random.default_rng(seed).integers(0, 256, (1, 3, h, w))
        img = Tensor((raw / 255.0).astype(np.float32))
        path = tmp_path_factory.mktemp("ppm") / "i.ppm"
        save_image_ppm(img, path)
        back = load_image_ppm(path)
        assert back.dims == (1, 3, h, w)
        assert np.array_equal(np.rint(back.data * 255.0), raw)

    def test_golden_fixture(self, data_dir):
        path = data_dir / "golden_image.ppm"
        assert checksum(path) == GOLDEN_SHA["golden_image.ppm"]
        img = load_image_ppm(path)
        assert img.dims == (1, 3, 2, 3)
        assert img.data[0, :, 0, 0].tolist() == [0.0, 0.0, 0.0]
        assert img.data[0, 0, 0, 1] == 1.0          # red pixel, R plane
        assert img.data[0, :, 1, 2].tolist() == [1.0, 1.0, 1.0]

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "i.ppm"
        path.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
        with pytest.raises(FormatError):
            load_image_ppm(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "i.ppm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x01\x02\x03")
        with pytest.raises(FormatError, match="trailing"):
            load_image_ppm(path)


class TestPreprocess:
    def test_zero_means_is_identity(self):
        img = rand_tensor(Rng(4), (1, 3, 4, 4), 0.0, 1.0)
        out = preprocess(img, (0.0, 0.0, 0.0))
        assert np.array_equal(out.data, img.data)

    def test_image_equal_to_means_cancels(self):
        means = (0.25, 0.5, 0.75)
        data = np.zeros((1, 3, 2, 2), np.float32)
        for c, m in enumerate(means):
            data[0, c] = m
        out = preprocess(Tensor(data), means)
        assert not out.data.any()

    def test_means_must_have_three_entries(self):
        img = rand_tensor(Rng(5), (1, 3, 2, 2))
        with pytest.raises(ShapeError):
            preprocess(img, (0.0, 0.0))
