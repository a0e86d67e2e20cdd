"""From-scratch CPU inference engine and analysis toolkit for the DABNet
semantic segmentation architecture."""

from .analysis import BenchReport, LayerReport, benchmark, count_macs, \
    count_params, layer_table, macs_from_trace, receptive_field
from .errors import AllocationError, DabNetError, DataError, FormatError, \
    MetricError, ShapeError, TruncationError, WeightStoreError
from .metrics import ConfusionMatrix, accumulate, iou_per_class, mean_iou
from .model_io import load_image_ppm, load_labels_pgm, load_tensor, load_weights, \
    preprocess, save_image_ppm, save_labels_pgm, save_tensor, save_weights
from .net import BN_EPS, ConvEvent, DabModuleSpec, NetworkSpec, StageEvent, \
    WeightStore, dab_module_forward, dabnet_forward, downsample_block, \
    init_random_weights, network_plan, predict_labels, required_entries
from .ops import BnParams, ConvSpec, PreluParams, avg_pool_downsample, \
    batch_norm_infer, bilinear_upsample, conv2d, max_pool_2x2_s2, prelu
from .tensor import Rng, Tensor, channel_slice, flatten_index, tensor_add, \
    tensor_concat_channels, tensor_fill_uniform, tensor_new, unflatten_index

__version__ = "0.1.0"

__all__ = [
    "AllocationError", "BN_EPS", "BenchReport", "BnParams", "ConfusionMatrix",
    "ConvEvent", "ConvSpec", "DabModuleSpec", "DabNetError", "DataError",
    "FormatError", "LayerReport", "MetricError", "NetworkSpec", "PreluParams",
    "Rng", "ShapeError", "StageEvent", "Tensor", "TruncationError",
    "WeightStore", "WeightStoreError", "accumulate", "avg_pool_downsample",
    "batch_norm_infer", "benchmark", "bilinear_upsample", "channel_slice",
    "conv2d", "count_macs", "count_params", "dab_module_forward",
    "dabnet_forward", "downsample_block", "flatten_index", "init_random_weights",
    "iou_per_class", "layer_table", "load_image_ppm", "load_labels_pgm",
    "load_tensor", "load_weights", "macs_from_trace", "max_pool_2x2_s2",
    "mean_iou", "network_plan", "predict_labels", "prelu", "preprocess",
    "receptive_field", "required_entries", "save_image_ppm", "save_labels_pgm",
    "save_tensor", "save_weights", "tensor_add", "tensor_concat_channels",
    "tensor_fill_uniform", "tensor_new", "unflatten_index",
]
