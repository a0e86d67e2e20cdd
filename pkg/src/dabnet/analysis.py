"""Static analysis (parameters, MACs, receptive field) and a benchmark.

All counts come from closed forms over the layer plan, never from running
the network: params = kh*kw*(Cin/groups)*Cout (+Cout with bias) per conv,
2*C per batch norm (gamma and beta; running stats are not learnable), C per
PReLU; MACs = Ho*Wo*Cout*(Cin/groups)*kh*kw for convs and zero for
everything else. Cost is reported in MACs, not FLOPs (FLOPs would be twice
the MAC count).

`macs_from_trace` recomputes the MAC total from the conv calls an actual
forward pass made, giving an independent cross-check of the closed form.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

from .errors import ShapeError
from .net import NetworkSpec, WeightStore, dabnet_forward, network_plan
from .tensor import Rng, tensor_fill_uniform, tensor_new


@dataclass(frozen=True)
class LayerReport:
    """One reporting row: shape out, cost, and receptive field after it."""

    name: str
    out_channels: int
    out_h: int
    out_w: int
    params: int
    macs: int
    rf: int
    jump: int


@dataclass(frozen=True)
class BenchReport:
    """Wall-clock timing of repeated forward passes on one in-memory input."""

    resolution: tuple
    warmup: int
    iters: int
    mean_ms: float
    fps: float
    checksum: str  # sha256 of the last run's logits, proves determinism


def _conv_params(c) -> int:
    kh, kw = c.kernel
    n = kh * kw * (c.in_channels // c.groups) * c.out_channels
    return n + (c.out_channels if c.has_bias else 0)


def _piece_params(piece) -> int:
    if piece.kind == "conv":
        return _conv_params(piece.conv)
    if piece.kind == "bn":
        return 2 * piece.channels
    return piece.channels


def layer_table(spec: NetworkSpec, hw: tuple = (512, 1024)) -> list[LayerReport]:
    """Walk the plan once, tracking shape and the receptive-field recurrence
    r' = r + (k-1)*d*j, j' = j*s. Branch points take the widest branch."""
    h, w = int(hw[0]), int(hw[1])
    if h % 8 or w % 8:
        raise ShapeError(f"input dims must be multiples of 8, got {h}x{w}")
    reports = []
    channels = 3
    r, j = 1, 1
    for row in network_plan(spec):
        params = sum(_piece_params(p) for p in row.pieces)
        macs = 0
        for piece in row.pieces:
            if piece.kind != "conv":
                continue
            c = piece.conv
            ho, wo = c.output_hw(h, w)
            kh, kw = c.kernel
            macs += ho * wo * c.out_channels * (c.in_channels // c.groups) * kh * kw
            h, w = ho, wo
        if row.kind == "conv":
            c = row.pieces[0].conv
            r += (c.kernel[0] - 1) * c.dilation[0] * j
            j *= c.stride[0]
            channels = c.out_channels
        elif row.kind == "down":
            # stride-2 conv branch dominates the 2x2 pool branch
            r += 2 * j
            j *= 2
            channels = row.pieces[-1].channels
        elif row.kind == "dab":
            # reduce conv plus the dilated context pair, per axis
            r += 2 * j * (1 + row.dilation)
        elif row.kind == "fuse":
            # pooled-image shortcut has a smaller field; concat keeps the max
            channels = row.pieces[-1].channels
        elif row.kind == "classifier":
            channels = row.pieces[0].conv.out_channels
        else:  # upsample
            h, w = 8 * h, 8 * w
            r += j  # 2-tap interpolation support
            j //= 8
        reports.append(LayerReport(row.name, channels, h, w, params, macs, r, j))
    return reports


def count_params(spec: NetworkSpec):
    """Per-row parameter counts and the total."""
    reports = layer_table(spec)
    return reports, sum(rep.params for rep in reports)


def count_macs(spec: NetworkSpec, hw: tuple = (512, 1024)):
    """Per-row multiply-accumulate counts at the given input size."""
    reports = layer_table(spec, hw)
    return reports, sum(rep.macs for rep in reports)


def receptive_field(spec: NetworkSpec) -> list:
    """(row name, r, j) after every row; r never decreases."""
    return [(rep.name, rep.rf, rep.jump) for rep in layer_table(spec)]


def macs_from_trace(events) -> int:
    """MAC total recomputed from the convs a traced forward actually ran."""
    total = 0
    for e in events:
        if not hasattr(e, "spec"):
            continue
        kh, kw = e.spec.kernel
        ho, wo = e.out_hw
        total += ho * wo * e.spec.out_channels \
            * (e.spec.in_channels // e.spec.groups) * kh * kw
    return total


def benchmark(spec: NetworkSpec, weights: WeightStore, hw: tuple,
              warmup: int = 10, iters: int = 100) -> BenchReport:
    """Time `iters` forward passes on one random input (seed 0), after
    `warmup` untimed passes. Nothing but the forward call is timed."""
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if warmup < 0:
        raise ValueError(f"warmup must be >= 0, got {warmup}")
    h, w = int(hw[0]), int(hw[1])
    image = tensor_new((1, 3, h, w))
    tensor_fill_uniform(image, Rng(0), 0.0, 1.0)
    for _ in range(warmup):
        dabnet_forward(image, spec, weights)
    elapsed = 0.0
    logits = None
    for _ in range(iters):
        t0 = time.perf_counter()
        logits = dabnet_forward(image, spec, weights)
        elapsed += time.perf_counter() - t0
    mean_ms = elapsed / iters * 1000.0
    return BenchReport(
        resolution=(h, w), warmup=warmup, iters=iters, mean_ms=mean_ms,
        fps=1000.0 / mean_ms,
        checksum=hashlib.sha256(logits.data.tobytes()).hexdigest())
