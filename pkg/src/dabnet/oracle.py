"""Deliberately slow scalar reference implementations of every op.

These exist only to validate the fast kernels: plain Python loops over flat
buffers, all addressing spelled out with the canonical ((n*C+c)*H+h)*W+w
formula, accumulation in Python floats (IEEE double), one float32 cast at
the end. No vectorization, no layout tricks. Any disagreement beyond the
stated tolerances is a fast-path bug by definition.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError
from .ops import BnParams, ConvSpec, PreluParams
from .tensor import Tensor


def _flat(t: Tensor) -> list:
    return [float(v) for v in t.data.ravel()]


def _pack(flat: list, dims) -> Tensor:
    return Tensor(np.asarray(flat, dtype=np.float64).reshape(dims).astype(np.float32))


def oracle_conv2d(x: Tensor, weight: Tensor, bias, spec: ConvSpec) -> Tensor:
    """Direct evaluation of the convolution sum, groups and dilation included."""
    n, c, h, w = x.dims
    if c != spec.in_channels or weight.dims != spec.weight_dims():
        raise ShapeError(f"input/weight do not match spec {spec}")
    co = spec.out_channels
    kh, kw = spec.kernel
    sh, sw = spec.stride
    ph, pw = spec.padding
    dh, dw = spec.dilation
    cig = c // spec.groups
    cog = co // spec.groups
    ho = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    wo = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"degenerate conv output {ho}x{wo}")
    xf = _flat(x)
    wf = _flat(weight)
    bf = [float(v) for v in bias] if spec.has_bias else None
    out = [0.0] * (n * co * ho * wo)
    for ni in range(n):
        for coi in range(co):
            g = coi // cog
            for hoi in range(ho):
                for woi in range(wo):
                    acc = 0.0
                    for cii in range(cig):
                        ci = g * cig + cii
                        for ki in range(kh):
                            hi = hoi * sh - ph + ki * dh
                            if hi < 0 or hi >= h:
                                continue  # zero-padded tap
                            for kj in range(kw):
                                wi = woi * sw - pw + kj * dw
                                if 0 <= wi < w:
                                    acc += wf[((coi * cig + cii) * kh + ki) * kw + kj] \
                                        * xf[((ni * c + ci) * h + hi) * w + wi]
                    if bf is not None:
                        acc += bf[coi]
                    out[((ni * co + coi) * ho + hoi) * wo + woi] = acc
    return _pack(out, (n, co, ho, wo))


def oracle_conv2d_unit_dilation(x: Tensor, weight: Tensor, bias,
                                spec: ConvSpec) -> Tensor:
    """Separate non-dilated code path (tap offsets written without the
    dilation factor); the dilation-identity check compares against it."""
    if spec.dilation != (1, 1):
        raise ValueError("this path only evaluates dilation (1,1) specs")
    n, c, h, w = x.dims
    if c != spec.in_channels or weight.dims != spec.weight_dims():
        raise ShapeError(f"input/weight do not match spec {spec}")
    co = spec.out_channels
    kh, kw = spec.kernel
    sh, sw = spec.stride
    ph, pw = spec.padding
    cig = c // spec.groups
    cog = co // spec.groups
    ho = (h + 2 * ph - (kh - 1) - 1) // sh + 1
    wo = (w + 2 * pw - (kw - 1) - 1) // sw + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"degenerate conv output {ho}x{wo}")
    xf = _flat(x)
    wf = _flat(weight)
    bf = [float(v) for v in bias] if spec.has_bias else None
    out = [0.0] * (n * co * ho * wo)
    for ni in range(n):
        for coi in range(co):
            g = coi // cog
            for hoi in range(ho):
                for woi in range(wo):
                    acc = 0.0
                    for cii in range(cig):
                        ci = g * cig + cii
                        for ki in range(kh):
                            hi = hoi * sh - ph + ki
                            if hi < 0 or hi >= h:
                                continue
                            for kj in range(kw):
                                wi = woi * sw - pw + kj
                                if 0 <= wi < w:
                                    acc += wf[((coi * cig + cii) * kh + ki) * kw + kj] \
                                        * xf[((ni * c + ci) * h + hi) * w + wi]
                    if bf is not None:
                        acc += bf[coi]
                    out[((ni * co + coi) * ho + hoi) * wo + woi] = acc
    return _pack(out, (n, co, ho, wo))


def oracle_batch_norm(x: Tensor, p: BnParams) -> Tensor:
    n, c, h, w = x.dims
    if c != p.channels:
        raise ShapeError(f"input has {c} channels, bn has {p.channels}")
    xf = _flat(x)
    out = [0.0] * len(xf)
    for ni in range(n):
        for ci in range(c):
            g = float(p.gamma[ci])
            b = float(p.beta[ci])
            m = float(p.mean[ci])
            s = math.sqrt(float(p.var[ci]) + p.eps)
            for hi in range(h):
                for wi in range(w):
                    i = ((ni * c + ci) * h + hi) * w + wi
                    out[i] = g * (xf[i] - m) / s + b
    return _pack(out, x.dims)


def oracle_prelu(x: Tensor, p: PreluParams) -> Tensor:
    n, c, h, w = x.dims
    if c != p.channels:
        raise ShapeError(f"input has {c} channels, prelu has {p.channels}")
    xf = _flat(x)
    out = [0.0] * len(xf)
    for ni in range(n):
        for ci in range(c):
            a = float(p.slope[ci])
            for hi in range(h):
                for wi in range(w):
                    i = ((ni * c + ci) * h + hi) * w + wi
                    v = xf[i]
                    out[i] = v if v >= 0 else a * v
    return _pack(out, x.dims)


def oracle_max_pool_2x2(x: Tensor) -> Tensor:
    n, c, h, w = x.dims
    if h < 2 or w < 2:
        raise ShapeError(f"max pool needs h, w >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    xf = _flat(x)
    out = [0.0] * (n * c * ho * wo)
    for ni in range(n):
        for ci in range(c):
            for hoi in range(ho):
                for woi in range(wo):
                    best = -math.inf
                    for di in range(2):
                        for dj in range(2):
                            v = xf[((ni * c + ci) * h + 2 * hoi + di) * w
                                   + 2 * woi + dj]
                            if v > best:
                                best = v
                    out[((ni * c + ci) * ho + hoi) * wo + woi] = best
    return _pack(out, (n, c, ho, wo))


def oracle_avg_pool(x: Tensor, factor: int) -> Tensor:
    f = int(factor)
    if f < 1 or f & (f - 1):
        raise ValueError(f"factor must be a power of two >= 1, got {factor}")
    n, c, h, w = x.dims
    if h % f or w % f:
        raise ShapeError(f"dims {h}x{w} not divisible by pooling factor {f}")
    ho, wo = h // f, w // f
    xf = _flat(x)
    out = [0.0] * (n * c * ho * wo)
    for ni in range(n):
        for ci in range(c):
            for hoi in range(ho):
                for woi in range(wo):
                    acc = 0.0
                    for di in range(f):
                        for dj in range(f):
                            acc += xf[((ni * c + ci) * h + f * hoi + di) * w
                                      + f * woi + dj]
                    out[((ni * c + ci) * ho + hoi) * wo + woi] = acc / (f * f)
    return _pack(out, (n, c, ho, wo))


def oracle_bilinear(x: Tensor, factor: int) -> Tensor:
    f = int(factor)
    if f < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    n, c, h, w = x.dims
    ho, wo = h * f, w * f
    xf = _flat(x)
    out = [0.0] * (n * c * ho * wo)
    for ni in range(n):
        for ci in range(c):
            for hoi in range(ho):
                sy = min(max((hoi + 0.5) / f - 0.5, 0.0), float(h - 1))
                y0 = int(math.floor(sy))
                y1 = min(y0 + 1, h - 1)
                ty = sy - y0
                for woi in range(wo):
                    sx = min(max((woi + 0.5) / f - 0.5, 0.0), float(w - 1))
                    x0 = int(math.floor(sx))
                    x1 = min(x0 + 1, w - 1)
                    tx = sx - x0
                    base = (ni * c + ci) * h
                    a = xf[(base + y0) * w + x0]
                    b = xf[(base + y0) * w + x1]
                    cc = xf[(base + y1) * w + x0]
                    d = xf[(base + y1) * w + x1]
                    out[((ni * c + ci) * ho + hoi) * wo + woi] = (
                        a * (1 - tx) * (1 - ty) + b * tx * (1 - ty)
                        + cc * (1 - tx) * ty + d * tx * ty)
    return _pack(out, (n, c, ho, wo))
