"""Graph IR: a flat, topologically ordered list of typed op nodes.

The deployable operator vocabulary is deliberately tiny: 3x3/1x1
convolution, stride-2 transposed convolution, ReLU, and two-input Add.
BatchNorm may appear in a freshly built graph but must be folded into the
preceding convolution before deployment.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InvalidInput


class OpKind(enum.Enum):
    CONV2D = "conv2d"
    CONV_TRANSPOSE2D = "conv_transpose2d"
    RELU = "relu"
    ADD = "add"
    BATCHNORM = "batchnorm"
    CONV1X1 = "conv1x1"


ALLOWED_INFERENCE_KINDS = frozenset({
    OpKind.CONV2D, OpKind.CONV_TRANSPOSE2D, OpKind.RELU, OpKind.ADD,
    OpKind.CONV1X1,
})

_CONV_KINDS = frozenset({OpKind.CONV2D, OpKind.CONV1X1, OpKind.CONV_TRANSPOSE2D})


def node_class(kind: OpKind) -> str | None:
    """Quantization class of an op kind; BatchNorm has none."""
    if kind in (OpKind.CONV2D, OpKind.CONV1X1):
        return "CONV"
    if kind is OpKind.CONV_TRANSPOSE2D:
        return "CONVTRANSPOSE"
    if kind is OpKind.RELU:
        return "RELU_LIKE"
    if kind is OpKind.ADD:
        return "ADD"
    return None


@dataclass(frozen=True)
class OpNode:
    name: str
    kind: OpKind
    inputs: tuple[str, ...]
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    eps: float = 1e-5

    def __post_init__(self):
        if not self.name:
            raise ConfigError("node name must be non-empty")
        n_in = 2 if self.kind is OpKind.ADD else 1
        if len(self.inputs) != n_in:
            raise ConfigError(
                f"{self.name}: {self.kind.value} takes {n_in} inputs, got {len(self.inputs)}")
        if self.kind is OpKind.CONV2D and self.kernel not in (1, 3):
            raise ConfigError(f"{self.name}: conv2d kernel must be 1 or 3")
        if self.kind is OpKind.CONV1X1 and self.kernel != 1:
            raise ConfigError(f"{self.name}: conv1x1 kernel must be 1")
        if self.kind is OpKind.CONV_TRANSPOSE2D:
            if self.kernel not in (2, 4) or self.stride != 2:
                raise ConfigError(
                    f"{self.name}: conv_transpose2d needs kernel 2 or 4, stride 2")


@dataclass
class Graph:
    """Nodes in topological order plus their named weight tensors.

    Weight names are '<node>.weight' / '<node>.bias' for convolutions and
    '<node>.bn_gamma' / '.bn_beta' / '.bn_mean' / '.bn_var' for BatchNorm.
    """

    nodes: list[OpNode]
    weights: dict[str, np.ndarray]
    output: str
    input_name: str = "input"
    input_channels: int = 0
    _by_name: dict[str, OpNode] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_name = {n.name: n for n in self.nodes}
        self.validate()

    def node(self, name: str) -> OpNode:
        return self._by_name[name]

    def validate(self) -> None:
        seen: dict[str, int] = {}
        if len(self._by_name) != len(self.nodes):
            raise ConfigError("duplicate node names")
        for n in self.nodes:
            for src in n.inputs:
                if src != self.input_name and src not in seen:
                    raise ConfigError(f"{n.name}: input {src!r} not defined earlier")
            seen[n.name] = 1
        if self.nodes and self.output not in seen:
            raise ConfigError(f"output node {self.output!r} not in graph")
        self._check_channels()
        self._check_weights()

    def _check_channels(self) -> None:
        ch = {self.input_name: self.input_channels}
        for n in self.nodes:
            if n.kind in _CONV_KINDS:
                if ch[n.inputs[0]] not in (0, n.in_ch):
                    raise ConfigError(
                        f"{n.name}: expects {n.in_ch} input channels, "
                        f"gets {ch[n.inputs[0]]}")
                ch[n.name] = n.out_ch
            elif n.kind is OpKind.ADD:
                a, b = ch[n.inputs[0]], ch[n.inputs[1]]
                if a != b and 0 not in (a, b):
                    raise ConfigError(f"{n.name}: add channel mismatch {a} vs {b}")
                ch[n.name] = a or b
            else:
                ch[n.name] = ch[n.inputs[0]]

    def _check_weights(self) -> None:
        for n in self.nodes:
            if n.kind in _CONV_KINDS:
                w = self.weights.get(f"{n.name}.weight")
                b = self.weights.get(f"{n.name}.bias")
                if w is None or b is None:
                    raise ConfigError(f"{n.name}: missing weight or bias")
                want = (n.out_ch, n.in_ch, n.kernel, n.kernel)
                if w.shape != want:
                    raise ConfigError(f"{n.name}.weight shape {w.shape} != {want}")
                if b.shape != (n.out_ch,):
                    raise ConfigError(f"{n.name}.bias shape {b.shape} != ({n.out_ch},)")
            elif n.kind is OpKind.BATCHNORM:
                for suffix in ("bn_gamma", "bn_beta", "bn_mean", "bn_var"):
                    t = self.weights.get(f"{n.name}.{suffix}")
                    if t is None or t.ndim != 1:
                        raise ConfigError(f"{n.name}.{suffix} missing or not a vector")

    def weight_names(self) -> list[str]:
        """Stored tensor names in node order (the container order)."""
        names = []
        for n in self.nodes:
            if n.kind in _CONV_KINDS:
                names += [f"{n.name}.weight", f"{n.name}.bias"]
            elif n.kind is OpKind.BATCHNORM:
                names += [f"{n.name}.{s}" for s in
                          ("bn_gamma", "bn_beta", "bn_mean", "bn_var")]
        return names


def validate_vocabulary(g: Graph, allow_batchnorm: bool = False) -> None:
    """Reject any node kind outside the deployable set."""
    allowed = set(ALLOWED_INFERENCE_KINDS)
    if allow_batchnorm:
        allowed.add(OpKind.BATCHNORM)
    for n in g.nodes:
        if n.kind not in allowed:
            raise InvalidInput(f"{n.name}: kind {n.kind.value} not allowed")


def count_params(g: Graph) -> int:
    """Learnable element count: conv weights and biases plus BN gamma/beta.

    BN running statistics are not counted; they are folded away before
    deployment and are not learnable storage.
    """
    total = 0
    for n in g.nodes:
        if n.kind in _CONV_KINDS:
            total += g.weights[f"{n.name}.weight"].size
            total += g.weights[f"{n.name}.bias"].size
        elif n.kind is OpKind.BATCHNORM:
            total += g.weights[f"{n.name}.bn_gamma"].size
            total += g.weights[f"{n.name}.bn_beta"].size
    return total
