"""Operator-restricted inference engine for the residual refinement net."""

from .graph import (ALLOWED_INFERENCE_KINDS, Graph, OpKind, OpNode, count_params,
                    node_class)
from .kernels import (add, batchnorm, conv2d, conv2d_int8, conv_transpose2d,
                      dequantize_int8, quantize_bias_int32, quantize_weight_int8,
                      relu)
from .unet import CONFIGS, UNET_M, UNET_S, UNetConfig, build_unet
from .fuse import fuse_bn
from .weights_io import load_weights, save_weights
from .infer import apply_node, forward, forward_collect, interpolate

__all__ = [
    "ALLOWED_INFERENCE_KINDS", "Graph", "OpKind", "OpNode", "count_params",
    "node_class", "add", "batchnorm", "conv2d", "conv2d_int8",
    "conv_transpose2d", "dequantize_int8", "quantize_bias_int32",
    "quantize_weight_int8", "relu", "CONFIGS", "UNET_M", "UNET_S",
    "UNetConfig", "build_unet", "fuse_bn", "load_weights", "save_weights",
    "apply_node", "forward", "forward_collect", "interpolate",
]
