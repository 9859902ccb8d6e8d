"""W8A8 post-training quantization simulation and instrumentation.

Activation scales come from a percentile-99.99 calibration over pooled
absolute values of every node output across all calibration runs
(scale = amax / 127, symmetric, zero-point 0).  Weight scales default to
per-tensor max|w| / 127.  fake_quant snaps a float tensor onto its int8
grid with round-half-to-even and is idempotent.

Execution with an op-class filter fake-quantizes the inputs, weights,
and outputs of every node whose class is in the filter and leaves other
nodes in full precision, so fidelity can be charged to operator classes
one at a time.  An empty filter reproduces the float path bit-exactly.

The iterative-accumulation lab isolates the failure mode of quantized
Add chains: a running state updated as s <- s + delta, where the scale
of the Add is sized by the state.  When the state is much larger than
the increments, the int8 grid spaced for the state wipes out increment
precision.  Relative to the state's own norm the damage looks tiny, so
fidelity is scored the way deployment consumes such a state: the state
holds sampling coordinates, and the readout samples a fixed sinusoidal
texture at them.  Absolute state error becomes phase error; a
unit-range state barely moves the phase while a wide state turns the
same absolute error into decorrelation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, SpecError
from .metrics import cos_sim
from .nnet.graph import Graph, OpKind, OpNode, node_class
from .nnet.infer import apply_node, forward, forward_collect
from .nnet.kernels import conv2d, relu

OP_CLASSES = ("CONV", "CONVTRANSPOSE", "RELU_LIKE", "ADD")

_CONV_KINDS = (OpKind.CONV2D, OpKind.CONV1X1, OpKind.CONV_TRANSPOSE2D)


def parse_op_filter(spec: str) -> frozenset[str]:
    """'conv,add' -> frozenset({'CONV', 'ADD'}); '' or 'none' -> empty."""
    spec = spec.strip().lower()
    if spec in ("", "none"):
        return frozenset()
    classes = []
    for tok in spec.split(","):
        tok = tok.strip().upper()
        if tok not in OP_CLASSES:
            raise InvalidInput(f"unknown op class {tok!r}")
        classes.append(tok)
    return frozenset(classes)


def filter_label(op_filter: frozenset[str]) -> str:
    if not op_filter:
        return "none"
    return ",".join(c.lower() for c in OP_CLASSES if c in op_filter)


@dataclass(frozen=True)
class QuantSpec:
    """Per-node-output activation scales and per-conv weight scales."""

    act_scales: dict[str, float]
    weight_scales: dict[str, np.ndarray] = field(default_factory=dict)
    percentile: float = 99.99
    per_channel: bool = False


def _amax_to_scale(amax: float) -> float:
    # an all-zero pool still needs a usable grid
    return (amax if amax > 0.0 else 1.0) / 127.0


def calibrate(g: Graph, calib_inputs, percentile: float = 99.99,
              per_channel: bool = False) -> QuantSpec:
    """Collect activation and weight scales from full-precision runs."""
    pools: dict[str, list[np.ndarray]] = {}
    n_runs = 0
    for x in calib_inputs:
        n_runs += 1
        outs = forward_collect(g, x)
        for name, val in outs.items():
            pools.setdefault(name, []).append(np.abs(val).ravel())
    if n_runs == 0:
        raise InvalidInput("calibration needs at least one input")
    act_scales = {}
    for name, chunks in pools.items():
        amax = float(np.percentile(np.concatenate(chunks), percentile))
        act_scales[name] = _amax_to_scale(amax)
    weight_scales = {}
    for n in g.nodes:
        if n.kind not in _CONV_KINDS:
            continue
        w = np.abs(g.weights[f"{n.name}.weight"].astype(np.float64))
        if per_channel:
            amax = w.max(axis=(1, 2, 3))
            weight_scales[n.name] = np.array([_amax_to_scale(a) for a in amax])
        else:
            weight_scales[n.name] = np.array(_amax_to_scale(float(w.max())))
    return QuantSpec(act_scales=act_scales, weight_scales=weight_scales,
                     percentile=percentile, per_channel=per_channel)


def fake_quant(values: np.ndarray, scale) -> np.ndarray:
    """Snap onto the int8 grid: clamp(round_half_even(v / s), -128, 127) * s.

    Idempotent: re-quantizing with the same scale is the identity.
    """
    v = np.asarray(values, dtype=np.float64)
    s = np.asarray(scale, dtype=np.float64)
    q = np.clip(np.rint(v / s), -128.0, 127.0)
    return q * s


class QuantizedGraph:
    """Executes a graph with fake quantization on the filtered op classes."""

    def __init__(self, g: Graph, spec: QuantSpec, op_filter: frozenset[str]):
        for c in op_filter:
            if c not in OP_CLASSES:
                raise InvalidInput(f"unknown op class {c!r}")
        self.graph = g
        self.spec = spec
        self.op_filter = frozenset(op_filter)

    def _act_scale(self, name: str, node: OpNode) -> float:
        try:
            return self.spec.act_scales[name]
        except KeyError:
            raise SpecError(f"{node.name}: no activation scale for {name!r}") from None

    def _node_weights(self, node: OpNode) -> dict[str, np.ndarray]:
        if node.kind not in _CONV_KINDS:
            return self.graph.weights
        wname = f"{node.name}.weight"
        w = self.graph.weights[wname].astype(np.float64)
        wscale = self.spec.weight_scales.get(node.name)
        if wscale is None:
            raise SpecError(f"{node.name}: no weight scale")
        s = np.asarray(wscale, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None, None, None]
        q = np.clip(np.rint(w / s), -127.0, 127.0) * s
        shadow = dict(self.graph.weights)
        shadow[wname] = q
        return shadow

    def forward(self, x) -> np.ndarray:
        data = x.data if hasattr(x, "data") else np.asarray(x, dtype=np.float64)
        values: dict[str, np.ndarray] = {self.graph.input_name: data}
        for node in self.graph.nodes:
            quantized = node_class(node.kind) in self.op_filter
            ins = [values[s] for s in node.inputs]
            weights = self.graph.weights
            if quantized:
                ins = [fake_quant(v, self._act_scale(s, node))
                       for v, s in zip(ins, node.inputs)]
                weights = self._node_weights(node)
            out = apply_node(node, ins, weights)
            if quantized:
                out = fake_quant(out, self._act_scale(node.name, node))
            values[node.name] = out
        return values[self.graph.output]


def quantize_graph(g: Graph, spec: QuantSpec,
                   op_filter: frozenset[str]) -> QuantizedGraph:
    return QuantizedGraph(g, spec, op_filter)


def run_instrumented(g: Graph, inputs, progression,
                     spec: QuantSpec | None = None,
                     calib_inputs=None, percentile: float = 99.99) -> dict:
    """Mean output cosine similarity for each filter in the progression.

    The first report row is the full-precision baseline compared against
    itself (exactly 1.0 by construction, computed anyway).
    """
    if spec is None:
        spec = calibrate(g, calib_inputs if calib_inputs is not None else inputs,
                         percentile=percentile)
    baseline = [forward(g, x).data for x in inputs]
    rows = []
    fp_cos = [cos_sim(b, b) for b in baseline]
    rows.append({"filter": "none", "cos_sim_mean": float(np.mean(fp_cos)),
                 "cos_sim_min": float(np.min(fp_cos)), "n_inputs": len(baseline)})
    for op_filter in progression:
        if not op_filter:
            continue
        qg = QuantizedGraph(g, spec, op_filter)
        sims = [cos_sim(qg.forward(x), b) for x, b in zip(inputs, baseline)]
        rows.append({"filter": filter_label(op_filter),
                     "cos_sim_mean": float(np.mean(sims)),
                     "cos_sim_min": float(np.min(sims)),
                     "n_inputs": len(sims)})
    return {"percentile": spec.percentile, "rows": rows}


def build_accum_net(channels: int = 8, stages: int = 3,
                    state_gain: float = 16.0, seed: int = 0) -> Graph:
    """A small net whose core is an iteratively accumulated state.

    A high-gain conv seeds a large-amplitude state; each stage adds a
    unit-scale refinement produced by a two-conv block; the head reads
    out (final state - initial state) through a 1x1 conv, so the output
    lives at the refinements' scale while the Adds operate at the
    state's scale.  This reproduces, in miniature, a refinement network
    that accumulates a large state across stages.
    """
    rng = np.random.default_rng(seed)
    nodes: list[OpNode] = []
    weights: dict[str, np.ndarray] = {}

    def conv(name, src, cin, cout, kernel, pad, w):
        kind = OpKind.CONV1X1 if kernel == 1 else OpKind.CONV2D
        nodes.append(OpNode(name=name, kind=kind, inputs=(src,), in_ch=cin,
                            out_ch=cout, kernel=kernel, pad=pad))
        weights[f"{name}.weight"] = w.astype(np.float32)
        weights[f"{name}.bias"] = np.zeros(cout, dtype=np.float32)
        return name

    c = channels
    std0 = np.sqrt(2.0 / (9 * c))
    cur = conv("feat", "input", c, c, 3, 1, rng.normal(0.0, std0, (c, c, 3, 3)))
    nodes.append(OpNode(name="feat.relu", kind=OpKind.RELU, inputs=(cur,)))
    cur = "feat.relu"
    state = conv("state0", cur, c, c, 3, 1,
                 rng.normal(0.0, std0 * state_gain, (c, c, 3, 3)))
    first_state = state
    for k in range(1, stages + 1):
        h = conv(f"stage{k}.conv1", state, c, c, 3, 1,
                 rng.normal(0.0, std0 / state_gain, (c, c, 3, 3)))
        nodes.append(OpNode(name=f"stage{k}.relu", kind=OpKind.RELU, inputs=(h,)))
        h = conv(f"stage{k}.conv2", f"stage{k}.relu", c, c, 3, 1,
                 rng.normal(0.0, std0, (c, c, 3, 3)))
        nodes.append(OpNode(name=f"stage{k}.add", kind=OpKind.ADD,
                            inputs=(state, h)))
        state = f"stage{k}.add"
    neg = conv("neg", first_state, c, c, 1, 0,
               (-np.eye(c)).reshape(c, c, 1, 1))
    nodes.append(OpNode(name="readout.add", kind=OpKind.ADD, inputs=(state, neg)))
    head = conv("head", "readout.add", c, c, 1, 0,
                rng.normal(0.0, 1.0 / np.sqrt(c), (c, c, 1, 1)))
    return Graph(nodes=nodes, weights=weights, output=head, input_channels=c)


def iter_accum_experiment(stages: int, state_amplitude: float, trials: int,
                          seed: int = 0, channels: int = 8, size: int = 24,
                          percentile: float = 99.99,
                          readout_freq: float = 0.4) -> dict:
    """Quantized Add chains at two state amplitudes, scored per stage.

    The chain is s <- s + delta with delta from a small random conv block
    fed the normalized state; only the Add is fake-quantized, with
    per-tensor scales calibrated on the full-precision running state.
    CosSim against the float chain is measured at every stage through
    the texture readout sin(readout_freq * state), for unit-amplitude
    states and for states scaled by state_amplitude.
    """
    if stages < 1 or trials < 1:
        raise InvalidInput("stages and trials must be >= 1")
    trial_curves = []
    for amplitude in (1.0, float(state_amplitude)):
        for t in range(trials):
            rng = np.random.default_rng((seed, t))
            base = rng.standard_normal((1, channels, size, size))
            w1 = rng.normal(0.0, np.sqrt(2.0 / (9 * channels)),
                            (channels, channels, 3, 3))
            w2 = rng.normal(0.0, np.sqrt(1.0 / (9 * channels)),
                            (channels, channels, 3, 3))
            zb = np.zeros(channels)

            def block(z):
                return conv2d(relu(conv2d(z, w1, zb, pad=1)), w2, zb, pad=1)

            s_fp = amplitude * base
            s_q = s_fp.copy()
            curve = []
            for _ in range(stages):
                d_fp = block(s_fp / amplitude)
                s_fp_next = s_fp + d_fp
                # scales calibrated on the full-precision pass
                in_scale = _amax_to_scale(
                    float(np.percentile(np.abs(s_fp), percentile)))
                d_scale = _amax_to_scale(
                    float(np.percentile(np.abs(d_fp), percentile)))
                out_scale = _amax_to_scale(
                    float(np.percentile(np.abs(s_fp_next), percentile)))
                d_q = block(s_q / amplitude)
                s_q = fake_quant(fake_quant(s_q, in_scale) + fake_quant(d_q, d_scale),
                                 out_scale)
                s_fp = s_fp_next
                curve.append(cos_sim(np.sin(readout_freq * s_q),
                                     np.sin(readout_freq * s_fp)))
            trial_curves.append({"amplitude": amplitude, "trial": t,
                                 "cos_sims": curve})
    rows = []
    for amplitude in (1.0, float(state_amplitude)):
        for k in range(stages):
            vals = [c["cos_sims"][k] for c in trial_curves
                    if c["amplitude"] == amplitude]
            rows.append({"amplitude": amplitude, "stage": k + 1,
                         "cos_sim": float(np.mean(vals)),
                         "cos_sim_min": float(np.min(vals))})
    return {"stages": stages, "state_amplitude": float(state_amplitude),
            "trials": trials, "rows": rows, "trial_curves": trial_curves}
