"""CPU microbenchmarks for the operator vocabulary.

Timing protocol: 10 warm-up iterations discarded, then 50 measured
iterations; entries report the minimum and the median.  FLOP counts use
the 2-flops-per-MAC convention; byte counts are the ideal traffic of
inputs, weights, and outputs, so the FLOPs/byte column separates
compute-bound convolutions from bandwidth-bound elementwise ops.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .nnet.graph import Graph, OpKind, node_class
from .nnet.infer import apply_node, forward_collect
from .nnet import kernels

DEFAULT_WARMUP = 10
DEFAULT_ITERS = 50


@dataclass(frozen=True)
class BenchEntry:
    name: str
    shape: tuple
    min_ns: int
    median_ns: float
    iters: int
    flops: float
    bytes_moved: float
    samples: tuple = field(repr=False, default=())

    @property
    def flops_per_byte(self) -> float:
        return self.flops / self.bytes_moved if self.bytes_moved else 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "shape": list(self.shape),
                "min_ns": self.min_ns, "median_ns": self.median_ns,
                "iters": self.iters, "flops": self.flops,
                "bytes_moved": self.bytes_moved,
                "flops_per_byte": self.flops_per_byte}


def _timed(run, warmup: int, iters: int) -> tuple[int, float, list[int]]:
    for _ in range(warmup):
        run()
    samples = []
    for _ in range(iters):
        t0 = time.perf_counter_ns()
        run()
        samples.append(time.perf_counter_ns() - t0)
    return min(samples), float(np.median(samples)), samples


def _conv_cost(x, w, out) -> tuple[float, float]:
    n, co, oh, ow = out.shape
    macs = n * co * oh * ow * w.shape[1] * w.shape[2] * w.shape[3]
    flops = 2.0 * macs + out.size
    moved = float(x.nbytes + w.nbytes + out.nbytes)
    return flops, moved


def bench_op(kind: str, shape: tuple, warmup: int = DEFAULT_WARMUP,
             iters: int = DEFAULT_ITERS, seed: int = 0) -> BenchEntry:
    """Time one operator on seeded random data of the given NCHW shape."""
    if len(shape) != 4:
        raise InvalidInput(f"shape must be NCHW, got {shape}")
    rng = np.random.default_rng(seed)
    n, c, h, w = shape
    x = rng.standard_normal(shape)
    if kind in ("conv3x3", "conv1x1"):
        k = 3 if kind == "conv3x3" else 1
        wt = rng.standard_normal((c, c, k, k)).astype(np.float32)
        b = np.zeros(c, dtype=np.float32)
        out = kernels.conv2d(x, wt, b, pad=k // 2)
        flops, moved = _conv_cost(x, wt, out)
        run = lambda: kernels.conv2d(x, wt, b, pad=k // 2)
    elif kind == "conv_transpose":
        wt = rng.standard_normal((c, c, 4, 4)).astype(np.float32)
        b = np.zeros(c, dtype=np.float32)
        out = kernels.conv_transpose2d(x, wt, b, stride=2, pad=1)
        flops, moved = _conv_cost(x, wt, out)
        run = lambda: kernels.conv_transpose2d(x, wt, b, stride=2, pad=1)
    elif kind == "relu":
        out = kernels.relu(x)
        flops = float(x.size)
        moved = float(x.nbytes + out.nbytes)
        run = lambda: kernels.relu(x)
    elif kind == "add":
        y = rng.standard_normal(shape)
        out = kernels.add(x, y)
        flops = float(x.size)
        moved = float(x.nbytes + y.nbytes + out.nbytes)
        run = lambda: kernels.add(x, y)
    elif kind == "batchnorm":
        g = np.ones(c, dtype=np.float32)
        be = np.zeros(c, dtype=np.float32)
        mu = np.zeros(c, dtype=np.float32)
        var = np.ones(c, dtype=np.float32)
        out = kernels.batchnorm(x, g, be, mu, var, 1e-5)
        flops = 2.0 * x.size
        moved = float(x.nbytes + out.nbytes)
        run = lambda: kernels.batchnorm(x, g, be, mu, var, 1e-5)
    else:
        raise InvalidInput(f"unknown op kind {kind!r}")
    mn, med, samples = _timed(run, warmup, iters)
    return BenchEntry(name=kind, shape=tuple(shape), min_ns=mn, median_ns=med,
                      iters=iters, flops=flops, bytes_moved=moved,
                      samples=tuple(samples))


@dataclass(frozen=True)
class BenchReport:
    entries: tuple
    class_shares: dict
    total_median_ns: float

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries],
                "class_shares_pct": dict(self.class_shares),
                "total_median_ns": self.total_median_ns}


def profile_graph(g: Graph, x, warmup: int = 3, iters: int = 10) -> BenchReport:
    """Per-node timings for one input, aggregated into per-class shares.

    Shares are percentages of the summed per-node medians and add up to
    100 within float rounding.  An empty graph yields an empty report.
    """
    if not g.nodes:
        return BenchReport(entries=(), class_shares={}, total_median_ns=0.0)
    acts = forward_collect(g, x)
    acts[g.input_name] = x.data if hasattr(x, "data") else np.asarray(x, dtype=np.float64)
    entries = []
    for node in g.nodes:
        ins = [acts[s] for s in node.inputs]
        run = lambda: apply_node(node, ins, g.weights)
        mn, med, samples = _timed(run, warmup, iters)
        out = acts[node.name]
        if node.kind in (OpKind.CONV2D, OpKind.CONV1X1, OpKind.CONV_TRANSPOSE2D):
            flops, moved = _conv_cost(ins[0], g.weights[f"{node.name}.weight"], out)
        else:
            flops = float(out.size)
            moved = float(sum(i.nbytes for i in ins) + out.nbytes)
        entries.append(BenchEntry(name=node.name, shape=tuple(out.shape),
                                  min_ns=mn, median_ns=med, iters=iters,
                                  flops=flops, bytes_moved=moved,
                                  samples=tuple(samples)))
    total = sum(e.median_ns for e in entries)
    shares: dict[str, float] = {}
    for node, e in zip(g.nodes, entries):
        cls = node_class(node.kind) or "BATCHNORM"
        shares[cls] = shares.get(cls, 0.0) + e.median_ns
    class_shares = {k: 100.0 * v / total for k, v in sorted(shares.items())}
    return BenchReport(entries=tuple(entries), class_shares=class_shares,
                       total_median_ns=total)
