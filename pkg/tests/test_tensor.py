import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dabnet.errors import AllocationError, ShapeError
from dabnet.tensor import (
    Tensor, Rng, tensor_new, tensor_add, tensor_concat_channels,
    tensor_fill_uniform, channel_slice, flatten_index, unflatten_index,
)
from conftest import rand_tensor

dims_st = st.tuples(st.integers(1, 3), st.integers(1, 4),
                    st.integers(1, 6), st.integers(1, 6))


class TestTensorNew:
    def test_zero_filled_f32_contiguous(self):
        t = tensor_new((2, 3, 4, 5))
        assert t.dims == (2, 3, 4, 5)
        assert t.size == 120
        assert t.data.dtype == np.float32
        assert t.data.flags["C_CONTIGUOUS"]
        assert not t.data.any()

    def test_zero_extent_allowed(self):
        assert tensor_new((0, 3, 4, 5)).size == 0

    def test_negative_dim_rejected(self):
        with pytest.raises(ShapeError):
            tensor_new((1, -1, 4, 5))

    def test_absurd_allocation_rejected(self):
        with pytest.raises(AllocationError):
            tensor_new((2**62, 2**62, 4, 5))

    def test_copy_is_independent(self):
        a = tensor_new((1, 1, 2, 2))
        b = a.copy()
        b.data[0, 0, 0, 0] = 5.0
        assert a.data[0, 0, 0, 0] == 0.0


class TestIndexing:
    @given(dims=dims_st, data=st.data())
    @settings(max_examples=50)
    def test_round_trip(self, dims, data):
        idx = tuple(data.draw(st.integers(0, d - 1)) for d in dims)
        flat = flatten_index(dims, idx)
        assert 0 <= flat < dims[0] * dims[1] * dims[2] * dims[3]
        assert unflatten_index(dims, flat) == idx

    def test_row_major_order(self):
        # last axis moves fastest
        assert flatten_index((1, 1, 2, 3), (0, 0, 0, 1)) == 1
        assert flatten_index((1, 1, 2, 3), (0, 0, 1, 0)) == 3
        assert flatten_index((2, 3, 4, 5), (1, 0, 0, 0)) == 60

    def test_out_of_range_rejected(self):
        with pytest.raises(ShapeError):
            flatten_index((1, 1, 2, 3), (0, 0, 2, 0))


class TestRng:
    def test_golden_sequence(self, data_dir):
        want = [int(line, 16) for line in
                (data_dir / "splitmix64_seed0.txt").read_text().split()]
        rng = Rng(0)
        assert [rng.next_u64() for _ in range(8)] == want

    def test_deterministic_and_distinct_seeds(self):
        a = Rng(42).uniform(64, -1.0, 1.0)
        b = Rng(42).uniform(64, -1.0, 1.0)
        c = Rng(43).uniform(64, -1.0, 1.0)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    @given(seed=st.integers(0, 2**64 - 1), count=st.integers(1, 256),
           lo=st.floats(-8, 8, allow_nan=False, width=32),
           span=st.floats(0.0009765625, 16, allow_nan=False, width=32))
    @settings(max_examples=60)
    def test_uniform_bounds(self, seed, count, lo, span):
        hi = lo + span
        out = Rng(seed).uniform(count, lo, hi)
        assert out.dtype == np.float32
        assert out.shape == (count,)
        assert (out >= lo).all() and (out < hi).all()

    def test_uniform_degenerate_interval(self):
        out = Rng(1).uniform(16, 2.5, 2.5)
        assert (out == 2.5).all()

    def test_uniform_reversed_interval_rejected(self):
        with pytest.raises(ValueError):
            Rng(1).uniform(4, 1.0, 0.0)

    def test_fill_consumes_stream(self):
        rng = Rng(9)
        t = tensor_new((1, 2, 3, 4))
        tensor_fill_uniform(t, rng, 0.0, 1.0)
        u = tensor_new((1, 2, 3, 4))
        tensor_fill_uniform(u, rng, 0.0, 1.0)
        assert not np.array_equal(t.data, u.data)


class TestElementwise:
    @given(dims=dims_st, seed=st.integers(0, 999))
    @settings(max_examples=40)
    def test_add_commutes(self, dims, seed):
        rng = Rng(seed)
        a, b = rand_tensor(rng, dims), rand_tensor(rng, dims)
        assert np.array_equal(tensor_add(a, b).data, tensor_add(b, a).data)

    def test_add_zero_is_identity(self):
        a = rand_tensor(Rng(3), (1, 2, 3, 4))
        z = tensor_new((1, 2, 3, 4))
        assert np.array_equal(tensor_add(a, z).data, a.data)

    def test_add_dims_must_match(self):
        with pytest.raises(ShapeError):
            tensor_add(tensor_new((1, 2, 3, 4)), tensor_new((1, 2, 3, 5)))


class TestConcatSlice:
    @given(seed=st.integers(0, 999), widths=st.lists(st.integers(1, 5),
                                                     min_size=1, max_size=4))
    @settings(max_examples=40)
    def test_concat_then_slice_recovers(self, seed, widths):
        rng = Rng(seed)
        parts = [rand_tensor(rng, (2, c, 3, 4)) for c in widths]
        cat = tensor_concat_channels(parts)
        assert cat.dims == (2, sum(widths), 3, 4)
        lo = 0
        for part in parts:
            hi = lo + part.dims[1]
            assert np.array_equal(channel_slice(cat, lo, hi).data, part.data)
            lo = hi

    def test_concat_rejects_mismatched_spatial(self):
        with pytest.raises(ShapeError):
            tensor_concat_channels([tensor_new((1, 1, 2, 2)),
                                    tensor_new((1, 1, 2, 3))])

    def test_slice_bounds_checked(self):
        t = tensor_new((1, 4, 2, 2))
        with pytest.raises(ShapeError):
            channel_slice(t, 2, 5)
        with pytest.raises(ShapeError):
            channel_slice(t, 3, 2)
