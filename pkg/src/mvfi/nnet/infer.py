"""Graph execution and the end-to-end interpolation entry point."""

from __future__ import annotations

import numpy as np

from ..core_types import Image, Tensor, float_to_u8
from ..errors import InvalidInput
from ..prealign import PrealignResult, SmoothingProfile, prealign_pair
from . import kernels
from .graph import Graph, OpKind, OpNode


def apply_node(node: OpNode, inputs: list[np.ndarray],
               weights: dict[str, np.ndarray]) -> np.ndarray:
    """Evaluate one node; the single dispatch point for every executor."""
    k = node.kind
    if k in (OpKind.CONV2D, OpKind.CONV1X1):
        return kernels.conv2d(inputs[0], weights[f"{node.name}.weight"],
                              weights[f"{node.name}.bias"],
                              stride=node.stride, pad=node.pad)
    if k is OpKind.CONV_TRANSPOSE2D:
        return kernels.conv_transpose2d(inputs[0], weights[f"{node.name}.weight"],
                                        weights[f"{node.name}.bias"],
                                        stride=node.stride, pad=node.pad)
    if k is OpKind.RELU:
        return kernels.relu(inputs[0])
    if k is OpKind.ADD:
        return kernels.add(inputs[0], inputs[1])
    if k is OpKind.BATCHNORM:
        return kernels.batchnorm(inputs[0],
                                 weights[f"{node.name}.bn_gamma"],
                                 weights[f"{node.name}.bn_beta"],
                                 weights[f"{node.name}.bn_mean"],
                                 weights[f"{node.name}.bn_var"], node.eps)
    raise InvalidInput(f"{node.name}: cannot execute kind {k.value}")


def _use_counts(g: Graph) -> dict[str, int]:
    uses: dict[str, int] = {}
    for n in g.nodes:
        for src in n.inputs:
            uses[src] = uses.get(src, 0) + 1
    uses[g.output] = uses.get(g.output, 0) + 1
    return uses


def forward(g: Graph, x) -> Tensor:
    """Run the graph on one NCHW input, freeing activations eagerly."""
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.ndim != 4:
        raise InvalidInput(f"input must be NCHW, got shape {data.shape}")
    uses = _use_counts(g)
    values: dict[str, np.ndarray] = {g.input_name: data}
    remaining = dict(uses)
    for node in g.nodes:
        ins = [values[s] for s in node.inputs]
        values[node.name] = apply_node(node, ins, g.weights)
        for s in node.inputs:
            remaining[s] -= 1
            if remaining[s] == 0:
                del values[s]
    return Tensor.from_array(values[g.output])


def forward_collect(g: Graph, x) -> dict[str, np.ndarray]:
    """Run the graph keeping every node output (calibration support)."""
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    values: dict[str, np.ndarray] = {g.input_name: data}
    for node in g.nodes:
        ins = [values[s] for s in node.inputs]
        values[node.name] = apply_node(node, ins, g.weights)
    return values


def _pad_to_multiple(chw: np.ndarray, multiple: int) -> np.ndarray:
    h, w = chw.shape[2], chw.shape[3]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return chw
    return np.pad(chw, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge")


def interpolate(img0: Image, img1: Image, vectors, g: Graph,
                profile: SmoothingProfile = SmoothingProfile.PRODUCTION,
                ) -> Image:
    """Motion-compensated blend plus the net's residual, as an 8-bit frame.

    The two half-warps are stacked into a 6-channel input, padded with
    edge replication to a multiple of 16 on each axis, refined by the
    graph, cropped, and added onto the blend before clamping to [0, 1].
    With a zero-initialized head the result is exactly the blend.
    """
    pre: PrealignResult = prealign_pair(img0, img1, vectors, profile)
    h, w = img0.height, img0.width
    stacked = np.concatenate([pre.w0.data.transpose(2, 0, 1),
                              pre.w1.data.transpose(2, 0, 1)])[None]
    x = _pad_to_multiple(stacked, 16)
    residual = forward(g, x).data[0, :, :h, :w].transpose(1, 2, 0)
    out = np.clip(pre.blend.data + residual, 0.0, 1.0)
    return Image.from_array(float_to_u8(out))
