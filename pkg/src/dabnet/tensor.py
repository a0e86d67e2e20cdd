"""Dense 4-D float32 tensors (NCHW) and a deterministic splitmix64 RNG.

Everything in the toolkit moves data as `Tensor`: a batch of feature maps
stored contiguously in row-major order with index layout
``((n*C + c)*H + h)*W + w``. There is no broadcasting, no views, and no
dtype other than float32; shape rules are enforced eagerly so kernel code
never has to re-check them.
"""
from __future__ import annotations

import numpy as np

from .errors import AllocationError, ShapeError

# Element counts must stay addressable with signed 64-bit arithmetic.
_MAX_ELEMENTS = 2**63 - 1

Shape4 = tuple[int, int, int, int]


class Tensor:
    """A dense (n, c, h, w) float32 array, contiguous in NCHW order."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 4:
            raise ShapeError(f"tensor must be 4-D (n,c,h,w), got ndim={arr.ndim}")
        if arr.dtype != np.float32:
            raise ShapeError(f"tensor dtype must be float32, got {arr.dtype}")
        self.data = np.ascontiguousarray(arr)

    @property
    def dims(self) -> Shape4:
        return self.data.shape  # type: ignore[return-value]

    @property
    def size(self) -> int:
        return int(self.data.size)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims})"


def tensor_new(dims: Shape4) -> Tensor:
    """Allocate a zero-filled tensor of the given dims.

    Dims may be zero (degenerate tensors are legal); negative dims are a
    shape error and element counts beyond 2**63-1 are refused.
    """
    if len(dims) != 4:
        raise ShapeError(f"expected 4 dims, got {len(dims)}")
    n, c, h, w = (int(d) for d in dims)
    for d in (n, c, h, w):
        if d < 0:
            raise ShapeError(f"dims must be non-negative, got {dims}")
    count = n * c * h * w
    if count > _MAX_ELEMENTS:
        raise AllocationError(f"element count {count} exceeds limit {_MAX_ELEMENTS}")
    try:
        data = np.zeros((n, c, h, w), dtype=np.float32)
    except MemoryError as exc:
        raise AllocationError(f"cannot allocate {count} elements") from exc
    return Tensor(data)


def flatten_index(dims: Shape4, idx: Shape4) -> int:
    """Canonical layout: ((n*C + c)*H + h)*W + w."""
    for d, i in zip(dims, idx):
        if not 0 <= i < d:
            raise ShapeError(f"index {idx} out of range for dims {dims}")
    _, c, h, w = dims
    ni, ci, hi, wi = idx
    return ((ni * c + ci) * h + hi) * w + wi


def unflatten_index(dims: Shape4, flat: int) -> Shape4:
    """Inverse of flatten_index."""
    _, c, h, w = dims
    wi = flat % w
    flat //= w
    hi = flat % h
    flat //= h
    ci = flat % c
    ni = flat // c
    return (ni, ci, hi, wi)


# ---------------------------------------------------------------------------
# splitmix64
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps, matching the scalar definition bit for bit
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """splitmix64 sequence generator; identical seed gives an identical
    stream on every platform."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, count: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Draw `count` float32 values in [lo, hi).

        Vectorized over the splitmix64 stream: the k-th value is derived
        from state + k*gamma, so the scalar and bulk paths agree exactly.
        """
        if lo > hi:
            raise ValueError(f"uniform range requires lo <= hi, got [{lo}, {hi})")
        count = int(count)
        if count < 0:
            raise ValueError("count must be non-negative")
        if count == 0:
            return np.empty(0, dtype=np.float32)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(self.state) + np.uint64(_GAMMA) * steps
        self.state = (self.state + _GAMMA * count) & _MASK64
        if lo == hi:
            return np.full(count, np.float32(lo), dtype=np.float32)
        bits = _mix64(states) >> np.uint64(40)  # top 24 bits
        unit = bits.astype(np.float64) * 2.0**-24  # exact in [0, 1)
        vals = (lo + unit * (hi - lo)).astype(np.float32)
        # float32 rounding may step outside the half-open interval; clamp
        low = np.float32(lo) if float(np.float32(lo)) >= lo else np.nextafter(
            np.float32(lo), np.float32(np.inf))
        top = np.float32(hi) if float(np.float32(hi)) < hi else np.nextafter(
            np.float32(hi), np.float32(-np.inf))
        return np.clip(vals, low, top)


def tensor_fill_uniform(t: Tensor, rng: Rng, lo: float, hi: float) -> Tensor:
    """Fill every element of t with uniform [lo, hi) draws, in layout order."""
    vals = rng.uniform(t.size, lo, hi)
    t.data[...] = vals.reshape(t.dims)
    return t


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------

def tensor_add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; dims must match exactly (no broadcasting)."""
    if a.dims != b.dims:
        raise ShapeError(f"add requires identical dims, got {a.dims} vs {b.dims}")
    return Tensor(a.data + b.data)


def tensor_concat_channels(tensors: list[Tensor] | tuple[Tensor, ...]) -> Tensor:
    """Concatenate along the channel dim; inputs keep their argument order."""
    if not tensors:
        raise ValueError("concat requires at least one tensor")
    first = tensors[0].dims
    for t in tensors[1:]:
        n, _, h, w = t.dims
        if (n, h, w) != (first[0], first[2], first[3]):
            raise ShapeError(
                f"concat requires matching (n,h,w), got {first} vs {t.dims}")
    return Tensor(np.concatenate([t.data for t in tensors], axis=1))


def channel_slice(t: Tensor, start: int, stop: int) -> Tensor:
    """Copy channels [start, stop) into a new tensor."""
    c = t.dims[1]
    if not (0 <= start <= stop <= c):
        raise ShapeError(f"channel slice [{start},{stop}) out of range for C={c}")
    return Tensor(np.ascontiguousarray(t.data[:, start:stop]))
