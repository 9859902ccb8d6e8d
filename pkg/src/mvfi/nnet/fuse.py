"""Fold BatchNorm into the preceding convolution.

With s = gamma / sqrt(var + eps):

    W_fused = s * W        (scaled per output channel)
    b_fused = s * (b - mean) + beta

The fold is exact in real arithmetic; stored weights are float32, so the
fused and unfused nets differ only by float32 rounding of the reassembled
weights.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import FusionError
from .graph import Graph, OpKind

_CONV_KINDS = (OpKind.CONV2D, OpKind.CONV1X1, OpKind.CONV_TRANSPOSE2D)


def fuse_bn(g: Graph) -> Graph:
    """Return a new graph with every BatchNorm folded away.

    Each BN must directly follow a convolution whose output nothing else
    consumes; anything else raises FusionError.
    """
    consumers: dict[str, list[str]] = {}
    for n in g.nodes:
        for src in n.inputs:
            consumers.setdefault(src, []).append(n.name)

    weights = dict(g.weights)
    replaced: dict[str, str] = {}  # bn name -> conv name
    nodes = []
    for n in g.nodes:
        if n.kind is not OpKind.BATCHNORM:
            inputs = tuple(replaced.get(s, s) for s in n.inputs)
            nodes.append(replace(n, inputs=inputs))
            continue
        src_name = n.inputs[0]
        src = g.node(src_name) if src_name != g.input_name else None
        if src is None or src.kind not in _CONV_KINDS:
            raise FusionError(f"{n.name}: input {src_name!r} is not a convolution")
        if consumers.get(src_name, []) != [n.name]:
            raise FusionError(
                f"{n.name}: conv {src_name!r} has other consumers, cannot fold")
        gamma = weights.pop(f"{n.name}.bn_gamma").astype(np.float64)
        beta = weights.pop(f"{n.name}.bn_beta").astype(np.float64)
        mean = weights.pop(f"{n.name}.bn_mean").astype(np.float64)
        var = weights.pop(f"{n.name}.bn_var").astype(np.float64)
        s = gamma / np.sqrt(var + n.eps)
        w = weights[f"{src_name}.weight"].astype(np.float64)
        b = weights[f"{src_name}.bias"].astype(np.float64)
        weights[f"{src_name}.weight"] = (w * s[:, None, None, None]).astype(np.float32)
        weights[f"{src_name}.bias"] = (s * (b - mean) + beta).astype(np.float32)
        replaced[n.name] = src_name
    output = replaced.get(g.output, g.output)
    return Graph(nodes=nodes, weights=weights, output=output,
                 input_name=g.input_name, input_channels=g.input_channels)
