"""The DABNet graph: DAB modules, downsampling blocks, long-range shortcuts.

The architecture is driven by a `NetworkSpec` and a flat `WeightStore` keyed
by dotted names. `network_plan` is the single source of truth for which
parameterized steps exist and what shapes their tensors have; the forward
functions, the random initializer, store validation and the static analysis
all walk it, so they cannot drift apart.

Canonical weight names:
    stage.<i>.conv.weight            stage conv kernels (stage.9 adds .bias)
    stage.<i>.bn.{gamma,beta,mean,var}
    stage.<i>.prelu.slope
    block<k>.mod<j>.<step>.<tensor>  DAB module steps, see `dab_module_plan`

Stages: 1-3 initial 3x3 convs (stage.1 stride 2), 4/6/8 the shortcut-fusion
BN+PReLU after each image concat, 5/7 the two downsampling blocks, 9 the
1x1 classifier. `upsample` (x8 bilinear) carries no weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, WeightStoreError
from .ops import BnParams, ConvSpec, PreluParams, avg_pool_downsample, \
    batch_norm_infer, bilinear_upsample, conv2d, max_pool_2x2_s2, prelu
from .tensor import Rng, Tensor, tensor_add, tensor_concat_channels

# All batch norms in the graph share one epsilon; it is an architecture
# constant, not a stored weight.
BN_EPS = 1e-5

SHORTCUT_CHANNELS = 3  # the raw RGB image concatenated at each boundary


# ===========================================================================
# specs
# ===========================================================================

@dataclass(frozen=True)
class DabModuleSpec:
    """One depth-wise asymmetric bottleneck: width W, context dilation d."""

    channels: int
    dilation: int

    def __post_init__(self):
        if self.channels < 2 or self.channels % 2:
            raise ValueError(f"module width must be even and >= 2, got {self.channels}")
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")


@dataclass(frozen=True)
class NetworkSpec:
    """Whole-network configuration; the defaults are the reference layout."""

    num_classes: int = 19
    init_channels: int = 32
    block1: tuple = (2, 2, 2)
    block2: tuple = (4, 4, 8, 8, 16, 16)

    def __post_init__(self):
        object.__setattr__(self, "block1", tuple(int(d) for d in self.block1))
        object.__setattr__(self, "block2", tuple(int(d) for d in self.block2))
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.init_channels < 1:
            raise ValueError(f"init_channels must be >= 1, got {self.init_channels}")
        if not self.block1 or not self.block2:
            raise ValueError("dilation lists must be non-empty")
        if min(self.block1 + self.block2) < 1:
            raise ValueError("dilations must be >= 1")

    # Channel arithmetic along the trunk. Each fusion appends the 3 image
    # channels; each block exit doubles width via the inter-block concat.
    @property
    def block1_channels(self) -> int:
        return 2 * self.init_channels

    @property
    def block2_channels(self) -> int:
        return 4 * self.init_channels

    @property
    def fuse1_channels(self) -> int:
        return self.init_channels + SHORTCUT_CHANNELS

    @property
    def fuse2_channels(self) -> int:
        return 2 * self.block1_channels + SHORTCUT_CHANNELS

    @property
    def fuse3_channels(self) -> int:
        return 2 * self.block2_channels + SHORTCUT_CHANNELS


# ===========================================================================
# layer plan
# ===========================================================================

@dataclass(frozen=True)
class PlanPiece:
    """One parameterized step: a conv, a batch norm, or a PReLU."""

    kind: str           # "conv" | "bn" | "prelu"
    prefix: str         # dotted name up to (not including) the tensor leaf
    conv: ConvSpec | None = None
    channels: int = 0

    def entries(self):
        """Yield (name, dims) for every tensor this piece stores."""
        if self.kind == "conv":
            yield self.prefix + ".weight", self.conv.weight_dims()
            if self.conv.has_bias:
                yield self.prefix + ".bias", (self.conv.out_channels,)
        elif self.kind == "bn":
            for leaf in ("gamma", "beta", "mean", "var"):
                yield f"{self.prefix}.{leaf}", (self.channels,)
        else:
            yield self.prefix + ".slope", (self.channels,)


@dataclass(frozen=True)
class PlanRow:
    """One reporting row of the network: a stage, a DAB module, the upsample."""

    name: str
    kind: str           # "conv" | "fuse" | "down" | "dab" | "classifier" | "upsample"
    pieces: tuple
    dilation: int = 1   # context dilation for dab rows


def _bn_prelu(prefix: str, channels: int) -> list:
    return [PlanPiece("bn", prefix + ".bn", channels=channels),
            PlanPiece("prelu", prefix + ".prelu", channels=channels)]


def _stage_conv(i: int, cspec: ConvSpec, with_norm: bool = True) -> PlanRow:
    pieces = [PlanPiece("conv", f"stage.{i}.conv", conv=cspec)]
    if with_norm:
        pieces += _bn_prelu(f"stage.{i}", cspec.out_channels)
    kind = "classifier" if not with_norm else "conv"
    return PlanRow(f"stage.{i}", kind, tuple(pieces))


def down_conv_spec(in_channels: int, out_channels: int) -> ConvSpec:
    """Stride-2 conv of a downsampling block.

    When widening, the conv emits only out-in channels and a 2x2 max pool
    carries the input alongside; otherwise the conv produces the full width.
    """
    emit = out_channels - in_channels if out_channels > in_channels else out_channels
    return ConvSpec(in_channels, emit, kernel=3, stride=2, padding=1)


def dab_module_plan(prefix: str, mspec: DabModuleSpec) -> list:
    """Parameterized steps of one DAB module, in execution order."""
    w = mspec.channels
    half = w // 2
    d = mspec.dilation
    dw = dict(groups=half)
    pieces = [
        PlanPiece("bn", f"{prefix}.pre_bn", channels=w),
        PlanPiece("prelu", f"{prefix}.pre_prelu", channels=w),
        PlanPiece("conv", f"{prefix}.reduce_conv",
                  conv=ConvSpec(w, half, kernel=3, padding=1)),
        PlanPiece("bn", f"{prefix}.reduce_bn", channels=half),
        PlanPiece("prelu", f"{prefix}.reduce_prelu", channels=half),
        # local branch: depth-wise 3x1 then 1x3, undilated
        PlanPiece("conv", f"{prefix}.local_v_conv",
                  conv=ConvSpec(half, half, kernel=(3, 1), padding=(1, 0), **dw)),
        PlanPiece("bn", f"{prefix}.local_v_bn", channels=half),
        PlanPiece("prelu", f"{prefix}.local_v_prelu", channels=half),
        PlanPiece("conv", f"{prefix}.local_h_conv",
                  conv=ConvSpec(half, half, kernel=(1, 3), padding=(0, 1), **dw)),
        PlanPiece("bn", f"{prefix}.local_h_bn", channels=half),
        PlanPiece("prelu", f"{prefix}.local_h_prelu", channels=half),
        # context branch: same pair at dilation d, padding split (d,0)/(0,d)
        PlanPiece("conv", f"{prefix}.context_v_conv",
                  conv=ConvSpec(half, half, kernel=(3, 1), padding=(d, 0),
                                dilation=(d, 1), **dw)),
        PlanPiece("bn", f"{prefix}.context_v_bn", channels=half),
        PlanPiece("prelu", f"{prefix}.context_v_prelu", channels=half),
        PlanPiece("conv", f"{prefix}.context_h_conv",
                  conv=ConvSpec(half, half, kernel=(1, 3), padding=(0, d),
                                dilation=(1, d), **dw)),
        PlanPiece("bn", f"{prefix}.context_h_bn", channels=half),
        PlanPiece("prelu", f"{prefix}.context_h_prelu", channels=half),
        PlanPiece("bn", f"{prefix}.merge_bn", channels=half),
        PlanPiece("prelu", f"{prefix}.merge_prelu", channels=half),
        PlanPiece("conv", f"{prefix}.expand_conv", conv=ConvSpec(half, w, kernel=1)),
    ]
    return pieces


def network_plan(spec: NetworkSpec) -> tuple:
    """Every reporting row of the network with its parameterized pieces."""
    c1 = spec.init_channels
    rows = [
        _stage_conv(1, ConvSpec(3, c1, kernel=3, stride=2, padding=1)),
        _stage_conv(2, ConvSpec(c1, c1, kernel=3, padding=1)),
        _stage_conv(3, ConvSpec(c1, c1, kernel=3, padding=1)),
        PlanRow("stage.4", "fuse", tuple(_bn_prelu("stage.4", spec.fuse1_channels))),
        PlanRow("stage.5", "down", tuple(
            [PlanPiece("conv", "stage.5.conv",
                       conv=down_conv_spec(spec.fuse1_channels, spec.block1_channels))]
            + _bn_prelu("stage.5", spec.block1_channels))),
    ]
    for j, d in enumerate(spec.block1, start=1):
        m = DabModuleSpec(spec.block1_channels, d)
        rows.append(PlanRow(f"block1.mod{j}", "dab",
                            tuple(dab_module_plan(f"block1.mod{j}", m)), dilation=d))
    rows += [
        PlanRow("stage.6", "fuse", tuple(_bn_prelu("stage.6", spec.fuse2_channels))),
        PlanRow("stage.7", "down", tuple(
            [PlanPiece("conv", "stage.7.conv",
                       conv=down_conv_spec(spec.fuse2_channels, spec.block2_channels))]
            + _bn_prelu("stage.7", spec.block2_channels))),
    ]
    for j, d in enumerate(spec.block2, start=1):
        m = DabModuleSpec(spec.block2_channels, d)
        rows.append(PlanRow(f"block2.mod{j}", "dab",
                            tuple(dab_module_plan(f"block2.mod{j}", m)), dilation=d))
    rows += [
        PlanRow("stage.8", "fuse", tuple(_bn_prelu("stage.8", spec.fuse3_channels))),
        _stage_conv(9, ConvSpec(spec.fuse3_channels, spec.num_classes, kernel=1,
                                has_bias=True), with_norm=False),
        PlanRow("upsample", "upsample", ()),
    ]
    return tuple(rows)


def required_entries(spec: NetworkSpec):
    """Yield (name, dims) for every tensor the network stores, in order."""
    for row in network_plan(spec):
        for piece in row.pieces:
            yield from piece.entries()


# ===========================================================================
# weight store
# ===========================================================================

class WeightStore:
    """Ordered map of dotted weight names to float32 arrays (rank 1 to 4)."""

    def __init__(self):
        self._entries: dict[str, np.ndarray] = {}

    def put(self, name: str, value) -> None:
        if name in self._entries:
            raise WeightStoreError(f"duplicate weight entry '{name}'")
        arr = np.ascontiguousarray(np.asarray(value, dtype=np.float32))
        if not 1 <= arr.ndim <= 4:
            raise WeightStoreError(
                f"entry '{name}' must have rank 1..4, got {arr.ndim}")
        if not np.isfinite(arr).all():
            raise ValueError(f"entry '{name}' contains non-finite values")
        self._entries[name] = arr

    def get(self, name: str) -> np.ndarray:
        try:
            return self._entries[name]
        except KeyError:
            raise WeightStoreError(f"missing weight entry '{name}'") from None

    def tensor(self, name: str) -> Tensor:
        arr = self.get(name)
        if arr.ndim != 4:
            raise WeightStoreError(f"entry '{name}' is not a 4-D kernel")
        return Tensor(arr)

    def vector(self, name: str) -> np.ndarray:
        arr = self.get(name)
        if arr.ndim != 1:
            raise WeightStoreError(f"entry '{name}' is not a vector")
        return arr

    def bn(self, prefix: str, eps: float = BN_EPS) -> BnParams:
        return BnParams(self.vector(prefix + ".gamma"), self.vector(prefix + ".beta"),
                        self.vector(prefix + ".mean"), self.vector(prefix + ".var"),
                        eps=eps)

    def prelu(self, prefix: str) -> PreluParams:
        return PreluParams(self.vector(prefix + ".slope"))

    def names(self):
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, name):
        return name in self._entries

    def param_count(self, include_running_stats: bool = False) -> int:
        """Total stored elements; running BN statistics are not learnable
        parameters and are excluded unless asked for."""
        total = 0
        for name, arr in self._entries.items():
            leaf = name.rsplit(".", 1)[1]
            if not include_running_stats and leaf in ("mean", "var"):
                continue
            total += arr.size
        return total

    def validate_complete(self, spec: NetworkSpec) -> None:
        """Exactly the entries the spec demands, with matching dims."""
        required = dict(required_entries(spec))
        for name, dims in required.items():
            if name not in self._entries:
                raise WeightStoreError(f"missing weight entry '{name}'")
            got = self._entries[name].shape
            if got != dims:
                raise WeightStoreError(
                    f"entry '{name}' has dims {got}, expected {dims}")
        for name in self._entries:
            if name not in required:
                raise WeightStoreError(f"unexpected weight entry '{name}'")


def init_random_weights(spec: NetworkSpec, seed: int = 0) -> WeightStore:
    """Conv weights/biases uniform [-0.1, 0.1); BN gamma 1, beta 0, mean 0,
    var 1; PReLU slopes 0.25. Deterministic in the seed."""
    rng = Rng(seed)
    store = WeightStore()
    for name, dims in required_entries(spec):
        leaf = name.rsplit(".", 1)[1]
        if leaf in ("weight", "bias"):
            count = int(np.prod(dims, dtype=np.int64))
            store.put(name, rng.uniform(count, -0.1, 0.1).reshape(dims))
        elif leaf in ("gamma", "var"):
            store.put(name, np.ones(dims, dtype=np.float32))
        elif leaf in ("beta", "mean"):
            store.put(name, np.zeros(dims, dtype=np.float32))
        else:  # slope
            store.put(name, np.full(dims, 0.25, dtype=np.float32))
    return store


# ===========================================================================
# trace events
# ===========================================================================

@dataclass(frozen=True)
class ConvEvent:
    """Emitted for every conv executed during a traced forward pass."""

    name: str
    spec: ConvSpec
    in_hw: tuple
    out_hw: tuple


@dataclass(frozen=True)
class StageEvent:
    """Emitted at the five trunk boundaries of a traced forward pass."""

    name: str           # init | down1 | down2 | classifier | output
    dims: tuple


# ===========================================================================
# forward graph
# ===========================================================================

def _run_conv(x: Tensor, store: WeightStore, prefix: str, cspec: ConvSpec,
              trace) -> Tensor:
    weight = store.tensor(prefix + ".weight")
    bias = store.vector(prefix + ".bias") if cspec.has_bias else None
    y = conv2d(x, weight, bias, cspec)
    if trace is not None:
        trace.append(ConvEvent(prefix, cspec, x.dims[2:], y.dims[2:]))
    return y


def _run_bn_prelu(x: Tensor, store: WeightStore, prefix: str) -> Tensor:
    return prelu(batch_norm_infer(x, store.bn(prefix + ".bn")),
                 store.prelu(prefix + ".prelu"))


def dab_module_forward(x: Tensor, mspec: DabModuleSpec, weights: WeightStore,
                       prefix: str, trace=None) -> Tensor:
    """One bottleneck: halve channels, two depth-wise asymmetric branches
    (one dilated), sum, restore channels, identity residual."""
    w = mspec.channels
    if x.dims[1] != w:
        raise ShapeError(f"module '{prefix}' expects {w} channels, got {x.dims[1]}")
    pieces = {p.prefix[len(prefix) + 1:]: p for p in dab_module_plan(prefix, mspec)}

    def step_conv(t, step):
        return _run_conv(t, weights, f"{prefix}.{step}", pieces[step].conv, trace)

    def step_norm(t, step):
        return prelu(batch_norm_infer(t, weights.bn(f"{prefix}.{step}_bn")),
                     weights.prelu(f"{prefix}.{step}_prelu"))

    t = step_norm(x, "pre")
    t = step_norm(step_conv(t, "reduce_conv"), "reduce")
    local = step_norm(step_conv(t, "local_v_conv"), "local_v")
    local = step_norm(step_conv(local, "local_h_conv"), "local_h")
    context = step_norm(step_conv(t, "context_v_conv"), "context_v")
    context = step_norm(step_conv(context, "context_h_conv"), "context_h")
    merged = step_norm(tensor_add(local, context), "merge")
    out = step_conv(merged, "expand_conv")  # no nonlinearity after this one
    return tensor_add(out, x)


def downsample_block(x: Tensor, out_channels: int, weights: WeightStore,
                     prefix: str, trace=None) -> Tensor:
    """Halve resolution. Widening: stride-2 conv concatenated with a 2x2 max
    pool of the input; otherwise a single stride-2 conv. BN+PReLU after."""
    n, c, h, w = x.dims
    if h % 2 or w % 2:
        raise ShapeError(f"downsample needs even dims, got {h}x{w}")
    cspec = down_conv_spec(c, out_channels)
    t = _run_conv(x, weights, prefix + ".conv", cspec, trace)
    if out_channels > c:
        t = tensor_concat_channels([t, max_pool_2x2_s2(x)])
    return _run_bn_prelu(t, weights, prefix)


def _stage(trace, name: str, t: Tensor) -> Tensor:
    if trace is not None:
        trace.append(StageEvent(name, t.dims))
    return t


def dabnet_forward(image: Tensor, spec: NetworkSpec, weights: WeightStore,
                   trace=None) -> Tensor:
    """Full forward pass: image (n,3,H,W) with H,W multiples of 8 -> logits
    (n,num_classes,H,W)."""
    n, c, h, w = image.dims
    if c != SHORTCUT_CHANNELS:
        raise ShapeError(f"expected a {SHORTCUT_CHANNELS}-channel image, got {c}")
    if h % 8 or w % 8:
        raise ShapeError(f"input dims must be multiples of 8, got {h}x{w}")
    weights.validate_complete(spec)
    plan = {row.name: row for row in network_plan(spec)}

    def stage_conv(t, i):
        row = plan[f"stage.{i}"]
        t = _run_conv(t, weights, f"stage.{i}.conv", row.pieces[0].conv, trace)
        if row.kind != "classifier":
            t = _run_bn_prelu(t, weights, f"stage.{i}")
        return t

    def fuse(t, i, factor):
        t = tensor_concat_channels([t, avg_pool_downsample(image, factor)])
        return _run_bn_prelu(t, weights, f"stage.{i}")

    t = stage_conv(image, 1)
    t = stage_conv(t, 2)
    t = stage_conv(t, 3)
    _stage(trace, "init", t)

    t = fuse(t, 4, 2)
    t = downsample_block(t, spec.block1_channels, weights, "stage.5", trace)
    _stage(trace, "down1", t)

    block_in = t
    for j, d in enumerate(spec.block1, start=1):
        t = dab_module_forward(t, DabModuleSpec(spec.block1_channels, d),
                               weights, f"block1.mod{j}", trace)
    t = tensor_concat_channels([t, block_in])

    t = fuse(t, 6, 4)
    t = downsample_block(t, spec.block2_channels, weights, "stage.7", trace)
    _stage(trace, "down2", t)

    block_in = t
    for j, d in enumerate(spec.block2, start=1):
        t = dab_module_forward(t, DabModuleSpec(spec.block2_channels, d),
                               weights, f"block2.mod{j}", trace)
    t = tensor_concat_channels([t, block_in])

    t = fuse(t, 8, 8)
    t = stage_conv(t, 9)
    _stage(trace, "classifier", t)

    t = bilinear_upsample(t, 8)
    _stage(trace, "output", t)
    return t


def predict_labels(logits: Tensor) -> np.ndarray:
    """Per-pixel argmax over classes; ties resolve to the lowest index."""
    return np.argmax(logits.data, axis=1, keepdims=True).astype(np.int64)
