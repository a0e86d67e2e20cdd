"""Primitive neural network operations on 4-D tensors.

Every op is a pure function: inputs are never mutated and results are new
tensors. Convolution, batch norm, average pooling and bilinear resampling
accumulate internally in float64 and cast to float32 once on the way out,
so the fast vectorized paths track the scalar reference semantics to well
inside the stated tolerances. PReLU and max pooling are exact in float32
and stay there.

Convolution is a single generalized kernel: standard, point-wise (1x1),
depth-wise (groups == channels), asymmetric (kx1 / 1xk) and dilated cases
are all parameterizations of `ConvSpec`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import Tensor

# ===========================================================================
# parameter containers
# ===========================================================================

Pair = tuple[int, int]


def _pair(v, name: str) -> Pair:
    if isinstance(v, (int, np.integer)):
        return (int(v), int(v))
    t = tuple(int(e) for e in v)
    if len(t) != 2:
        raise ValueError(f"{name} must be an int or a pair, got {v!r}")
    return t


def _vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float32)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ConvSpec:
    """Static description of one 2-D convolution."""

    in_channels: int
    out_channels: int
    kernel: Pair
    stride: Pair = (1, 1)
    padding: Pair = (0, 0)
    dilation: Pair = (1, 1)
    groups: int = 1
    has_bias: bool = False

    def __post_init__(self):
        for f in ("kernel", "stride", "padding", "dilation"):
            object.__setattr__(self, f, _pair(getattr(self, f), f))
        if self.in_channels < 1 or self.out_channels < 1 or self.groups < 1:
            raise ValueError(f"channel/group counts must be >= 1: {self}")
        if min(self.kernel) < 1 or min(self.stride) < 1 or min(self.dilation) < 1:
            raise ValueError(f"kernel/stride/dilation must be >= 1: {self}")
        if min(self.padding) < 0:
            raise ValueError(f"padding must be >= 0: {self}")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"groups={self.groups} must divide in={self.in_channels} "
                f"and out={self.out_channels}")

    @property
    def is_depthwise(self) -> bool:
        return self.groups == self.in_channels == self.out_channels

    def weight_dims(self) -> tuple[int, int, int, int]:
        kh, kw = self.kernel
        return (self.out_channels, self.in_channels // self.groups, kh, kw)

    def output_hw(self, h: int, w: int) -> Pair:
        """Spatial output size: floor((x + 2p - d*(k-1) - 1)/s) + 1 per axis."""
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        dh, dw = self.dilation
        ho = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
        wo = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
        if ho < 1 or wo < 1:
            raise ShapeError(
                f"degenerate conv output {ho}x{wo} for input {h}x{w} with {self}")
        return ho, wo


class BnParams:
    """Inference-time batch norm: per-channel affine over frozen statistics."""

    __slots__ = ("gamma", "beta", "mean", "var", "eps")

    def __init__(self, gamma, beta, mean, var, eps: float = 1e-5):
        self.gamma = _vector(gamma, "gamma")
        self.beta = _vector(beta, "beta")
        self.mean = _vector(mean, "mean")
        self.var = _vector(var, "var")
        c = len(self.gamma)
        for name in ("beta", "mean", "var"):
            if len(getattr(self, name)) != c:
                raise ShapeError(
                    f"{name} length {len(getattr(self, name))} != gamma length {c}")
        if np.any(self.var < 0):
            raise ValueError("running variance must be non-negative")
        if eps < 0:
            raise ValueError("eps must be non-negative")
        self.eps = float(eps)

    @property
    def channels(self) -> int:
        return len(self.gamma)

    @classmethod
    def identity(cls, channels: int) -> "BnParams":
        z = np.zeros(channels, dtype=np.float32)
        o = np.ones(channels, dtype=np.float32)
        return cls(o, z, z, o, eps=0.0)


class PreluParams:
    """Per-channel negative-half slope."""

    __slots__ = ("slope",)

    def __init__(self, slope):
        self.slope = _vector(slope, "slope")

    @property
    def channels(self) -> int:
        return len(self.slope)


# ===========================================================================
# convolution
# ===========================================================================

# Cap on the unrolled-window buffer (float64 elements, ~64 MB): large
# outputs are processed in output-row slabs so memory stays flat.
_COL_BUDGET = 8 << 20


def conv2d(x: Tensor, weight: Tensor, bias, spec: ConvSpec) -> Tensor:
    """Generalized 2-D cross-correlation with zero padding.

    Strategy: pad once, unroll kernel windows into a (Cin/g * kh * kw, pixels)
    column buffer one output-row slab at a time, and hand each slab to one
    float64 matrix multiply. The depth-wise case skips the unroll and
    accumulates per-tap channel broadcasts instead.
    """
    n, c, h, w = x.dims
    if c != spec.in_channels:
        raise ShapeError(f"input has {c} channels, spec expects {spec.in_channels}")
    if weight.dims != spec.weight_dims():
        raise ShapeError(
            f"weight dims {weight.dims} do not match spec {spec.weight_dims()}")
    if spec.has_bias:
        if bias is None:
            raise ShapeError("spec has_bias=True but no bias given")
        bias = _vector(bias, "bias")
        if len(bias) != spec.out_channels:
            raise ShapeError(
                f"bias length {len(bias)} != out_channels {spec.out_channels}")
    elif bias is not None:
        raise ShapeError("spec has_bias=False but a bias was given")

    co = spec.out_channels
    kh, kw = spec.kernel
    sh, sw = spec.stride
    ph, pw = spec.padding
    dh, dw = spec.dilation
    ho, wo = spec.output_hw(h, w)

    if ph == 0 and pw == 0:
        xp = x.data
    else:
        xp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=np.float32)
        xp[:, :, ph:ph + h, pw:pw + w] = x.data
    w64 = weight.data.astype(np.float64)
    b64 = bias.astype(np.float64) if spec.has_bias else None

    if spec.is_depthwise:
        acc = np.zeros((n, co, ho, wo), dtype=np.float64)
        for ki in range(kh):
            for kj in range(kw):
                acc += w64[None, :, 0, ki, kj, None, None] \
                    * xp[:, :, ki * dh: ki * dh + (ho - 1) * sh + 1: sh,
                         kj * dw: kj * dw + (wo - 1) * sw + 1: sw]
        if b64 is not None:
            acc += b64[None, :, None, None]
        return Tensor(acc.astype(np.float32))

    cig = c // spec.groups
    cog = co // spec.groups
    out = np.empty((n, co, ho, wo), dtype=np.float32)
    slab = max(1, _COL_BUDGET // (cig * kh * kw * wo))
    for g in range(spec.groups):
        wmat = w64[g * cog:(g + 1) * cog].reshape(cog, cig * kh * kw)
        for ni in range(n):
            for oh0 in range(0, ho, slab):
                oh1 = min(ho, oh0 + slab)
                rows = oh1 - oh0
                cols = np.empty((cig, kh, kw, rows, wo), dtype=np.float64)
                for ki in range(kh):
                    hi0 = ki * dh + oh0 * sh
                    for kj in range(kw):
                        cols[:, ki, kj] = xp[
                            ni, g * cig:(g + 1) * cig,
                            hi0: hi0 + (rows - 1) * sh + 1: sh,
                            kj * dw: kj * dw + (wo - 1) * sw + 1: sw]
                res = wmat @ cols.reshape(cig * kh * kw, rows * wo)
                if b64 is not None:
                    res += b64[g * cog:(g + 1) * cog, None]
                out[ni, g * cog:(g + 1) * cog, oh0:oh1] = \
                    res.reshape(cog, rows, wo).astype(np.float32)
    return Tensor(out)


# ===========================================================================
# normalization and activation
# ===========================================================================

def batch_norm_infer(x: Tensor, p: BnParams) -> Tensor:
    """Per-channel gamma*(x - mean)/sqrt(var + eps) + beta."""
    if x.dims[1] != p.channels:
        raise ShapeError(f"input has {x.dims[1]} channels, bn has {p.channels}")
    scale = p.gamma.astype(np.float64) / np.sqrt(p.var.astype(np.float64) + p.eps)
    shift = p.beta.astype(np.float64) - p.mean.astype(np.float64) * scale
    # f32 * f64 upcasts on the fly; one pass instead of astype-then-multiply
    out = x.data * scale[None, :, None, None]
    out += shift[None, :, None, None]
    return Tensor(out.astype(np.float32))


def prelu(x: Tensor, p: PreluParams) -> Tensor:
    """x where x >= 0, slope[c]*x elsewhere."""
    if x.dims[1] != p.channels:
        raise ShapeError(f"input has {x.dims[1]} channels, prelu has {p.channels}")
    d = x.data
    return Tensor(np.where(d >= 0, d, d * p.slope[None, :, None, None]))


# ===========================================================================
# pooling
# ===========================================================================

def max_pool_2x2_s2(x: Tensor) -> Tensor:
    """2x2 window max, stride 2; an odd trailing row/column is dropped."""
    n, c, h, w = x.dims
    if h < 2 or w < 2:
        raise ShapeError(f"max pool needs h, w >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    d = x.data[:, :, :2 * ho, :2 * wo]
    out = np.maximum(
        np.maximum(d[:, :, 0::2, 0::2], d[:, :, 0::2, 1::2]),
        np.maximum(d[:, :, 1::2, 0::2], d[:, :, 1::2, 1::2]))
    return Tensor(np.ascontiguousarray(out))


def avg_pool_downsample(x: Tensor, factor: int) -> Tensor:
    """Non-overlapping factor x factor mean pooling; factor is a power of two."""
    f = int(factor)
    if f < 1 or f & (f - 1):
        raise ValueError(f"factor must be a power of two >= 1, got {factor}")
    n, c, h, w = x.dims
    if h % f or w % f:
        raise ShapeError(f"dims {h}x{w} not divisible by pooling factor {f}")
    if f == 1:
        return x.copy()
    d = x.data.astype(np.float64).reshape(n, c, h // f, f, w // f, f)
    return Tensor(d.mean(axis=(3, 5)).astype(np.float32))


# ===========================================================================
# resampling
# ===========================================================================

def _source_axis(out_size: int, in_size: int, factor: int):
    # half-pixel mapping: src = (dst + 0.5)/factor - 0.5, clamped to the edge
    s = (np.arange(out_size, dtype=np.float64) + 0.5) / factor - 0.5
    s = np.clip(s, 0.0, in_size - 1)
    lo = np.floor(s).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    return lo, hi, s - lo


def bilinear_upsample(x: Tensor, factor: int) -> Tensor:
    """Upscale by an integer factor with half-pixel bilinear sampling."""
    f = int(factor)
    if f < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if f == 1:
        return x.copy()
    n, c, h, w = x.dims
    y0, y1, wy = _source_axis(h * f, h, f)
    x0, x1, wx = _source_axis(w * f, w, f)
    # gathers stay f32; multiplying by the f64 weights upcasts on the fly
    d = x.data
    rows = d[:, :, y0, :] * (1.0 - wy)[None, None, :, None] \
        + d[:, :, y1, :] * wy[None, None, :, None]
    out = rows[:, :, :, x0] * (1.0 - wx) + rows[:, :, :, x1] * wx
    return Tensor(out.astype(np.float32))
