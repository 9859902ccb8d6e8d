"""Encoder/decoder residual net over the restricted operator vocabulary.

Topology: a full-resolution stem (3x3 conv + ReLU), four encoder levels
(stride-2 3x3 downsample + ReLU, then residual blocks), a bottleneck at
1/16 resolution, four decoder levels (stride-2 transposed conv, Add with
the matching encoder activation, one residual block), and a zero-
initialized 1x1 head producing a 3-channel residual.

A residual block is conv-BN-ReLU-conv-BN plus the skip Add, with no
activation after the Add.  Every convolution carries a bias; BN appears
only inside residual blocks, directly after each conv.

The transposed convolutions use kernel 4, stride 2, padding 1 (an exact
2x upsample).  Kernel 2 would also upsample exactly but leaves the model
well short of its parameter budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .graph import Graph, OpKind, OpNode


@dataclass(frozen=True)
class UNetConfig:
    channels: tuple[int, int, int, int]
    enc_blocks: tuple[int, int, int, int]
    bottleneck_blocks: int
    in_ch: int = 6
    out_ch: int = 3

    def __post_init__(self):
        if len(self.channels) != 4 or len(self.enc_blocks) != 4:
            raise ConfigError("channels and enc_blocks must have 4 entries")
        if self.bottleneck_blocks < 1:
            raise ConfigError("bottleneck_blocks must be >= 1")
        if any(c < 1 for c in self.channels) or any(b < 0 for b in self.enc_blocks):
            raise ConfigError("channels must be positive, enc_blocks non-negative")


UNET_S = UNetConfig(channels=(16, 32, 64, 64), enc_blocks=(1, 1, 1, 2),
                    bottleneck_blocks=4)
UNET_M = UNetConfig(channels=(16, 32, 96, 96), enc_blocks=(1, 1, 2, 2),
                    bottleneck_blocks=8)

CONFIGS = {"unet-s": UNET_S, "unet-m": UNET_M}


class _Builder:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.nodes: list[OpNode] = []
        self.weights: dict[str, np.ndarray] = {}

    def conv(self, name, src, cin, cout, kernel, stride=1, pad=0, zero=False):
        kind = OpKind.CONV1X1 if kernel == 1 else OpKind.CONV2D
        self.nodes.append(OpNode(name=name, kind=kind, inputs=(src,),
                                 in_ch=cin, out_ch=cout, kernel=kernel,
                                 stride=stride, pad=pad))
        if zero:
            w = np.zeros((cout, cin, kernel, kernel), dtype=np.float32)
        else:
            std = np.sqrt(2.0 / (cin * kernel * kernel))
            w = self.rng.normal(0.0, std, (cout, cin, kernel, kernel)).astype(np.float32)
        self.weights[f"{name}.weight"] = w
        self.weights[f"{name}.bias"] = np.zeros(cout, dtype=np.float32)
        return name

    def conv_t(self, name, src, cin, cout):
        self.nodes.append(OpNode(name=name, kind=OpKind.CONV_TRANSPOSE2D,
                                 inputs=(src,), in_ch=cin, out_ch=cout,
                                 kernel=4, stride=2, pad=1))
        std = np.sqrt(2.0 / (cin * 16))
        self.weights[f"{name}.weight"] = self.rng.normal(
            0.0, std, (cout, cin, 4, 4)).astype(np.float32)
        self.weights[f"{name}.bias"] = np.zeros(cout, dtype=np.float32)
        return name

    def bn(self, name, src, c):
        self.nodes.append(OpNode(name=name, kind=OpKind.BATCHNORM,
                                 inputs=(src,), in_ch=c, out_ch=c))
        self.weights[f"{name}.bn_gamma"] = np.ones(c, dtype=np.float32)
        self.weights[f"{name}.bn_beta"] = np.zeros(c, dtype=np.float32)
        self.weights[f"{name}.bn_mean"] = np.zeros(c, dtype=np.float32)
        self.weights[f"{name}.bn_var"] = np.ones(c, dtype=np.float32)
        return name

    def relu(self, name, src):
        self.nodes.append(OpNode(name=name, kind=OpKind.RELU, inputs=(src,)))
        return name

    def plus(self, name, a, b):
        self.nodes.append(OpNode(name=name, kind=OpKind.ADD, inputs=(a, b)))
        return name

    def resblock(self, name, src, c):
        h = self.conv(f"{name}.conv1", src, c, c, 3, 1, 1)
        h = self.bn(f"{name}.bn1", h, c)
        h = self.relu(f"{name}.relu", h)
        h = self.conv(f"{name}.conv2", h, c, c, 3, 1, 1)
        h = self.bn(f"{name}.bn2", h, c)
        return self.plus(f"{name}.add", h, src)


def build_unet(cfg: UNetConfig, seed: int = 0) -> Graph:
    """Build the net with seeded random conv weights, identity BN, zero head."""
    b = _Builder(seed)
    ch = cfg.channels
    cur = b.conv("stem", "input", cfg.in_ch, ch[0], 3, 1, 1)
    cur = b.relu("stem.relu", cur)
    skips = [cur]
    prev = ch[0]
    for i in range(4):
        cur = b.conv(f"enc{i + 1}.down", cur, prev, ch[i], 3, 2, 1)
        cur = b.relu(f"enc{i + 1}.down.relu", cur)
        for j in range(cfg.enc_blocks[i]):
            cur = b.resblock(f"enc{i + 1}.rb{j}", cur, ch[i])
        if i < 3:
            skips.append(cur)
        prev = ch[i]
    for j in range(cfg.bottleneck_blocks):
        cur = b.resblock(f"bott.rb{j}", cur, ch[3])
    plan = [(ch[3], ch[2], skips[3]), (ch[2], ch[1], skips[2]),
            (ch[1], ch[0], skips[1]), (ch[0], ch[0], skips[0])]
    for lev, (cin, cout, skip) in enumerate(plan, start=1):
        up = b.conv_t(f"dec{lev}.up", cur, cin, cout)
        merged = b.plus(f"dec{lev}.add", up, skip)
        cur = b.resblock(f"dec{lev}.rb0", merged, cout)
    head = b.conv("head", cur, ch[0], cfg.out_ch, 1, zero=True)
    return Graph(nodes=b.nodes, weights=b.weights, output=head,
                 input_channels=cfg.in_ch)
