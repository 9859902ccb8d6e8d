"""Command-line front end.

Commands are reproducible from (config, seed): rerunning with the same
inputs yields byte-identical frames, manifests, and reports, except for
fields under "timing", which are excluded from that guarantee.  The
MVFI_THREADS environment variable caps worker threads for per-pair work;
results are identical at any thread count.

A config file passed with --config holds KEY=VALUE lines (hash comments
allowed); explicit command-line flags override it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import frame_io, metrics, quant, synth
from .core_types import FlowField, Image
from .errors import MVFIError
from .mv_ingest import parse_sidecar, select_vectors, serialize_sidecar
from .nnet import (CONFIGS, build_unet, count_params, fuse_bn, interpolate,
                   load_weights, save_weights)
from .prealign import SmoothingProfile, prealign_pair
from .synth import SynthSpec

PROFILES = {p.value: p for p in SmoothingProfile}


@dataclass(frozen=True)
class RunConfig:
    """Merged view of config-file defaults and command-line flags."""

    values: dict

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def require(self, key):
        v = self.values.get(key)
        if v is None:
            raise MVFIError(f"missing required option --{key.replace('_', '-')}")
        return v

    def get_int(self, key, default=None):
        return _to_num(int, key, self.get(key, default))

    def get_float(self, key, default=None):
        return _to_num(float, key, self.get(key, default))

    def require_int(self, key):
        return _to_num(int, key, self.require(key))

    def echo(self) -> dict:
        return {k: v for k, v in sorted(self.values.items()) if v is not None}


def load_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MVFIError(f"{path}:{lineno}: expected KEY=VALUE")
        key, val = line.split("=", 1)
        out[key.strip().lower().replace("-", "_")] = val.strip()
    return out


def build_run_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        merged.update(load_config_file(cfg_path))
    for key, val in vars(args).items():
        if key in ("func", "config"):
            continue
        if val is not None:
            merged[key] = val
    return RunConfig(values=merged)


def thread_count() -> int:
    raw = os.environ.get("MVFI_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, min(int(raw), 64))
    except ValueError:
        return 1


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _to_num(cast, key, value):
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise MVFIError(
            f"--{str(key).replace('_', '-')} expects a number, got {value!r}"
        ) from None


def _parse_pair(text, cast=float):
    parts = str(text).replace("x", ",").split(",")
    if len(parts) != 2:
        raise MVFIError(f"expected two comma-separated values, got {text!r}")
    try:
        return cast(parts[0]), cast(parts[1])
    except ValueError:
        raise MVFIError(f"expected two numbers, got {text!r}") from None


def _parse_shape(text):
    parts = [t for t in str(text).replace("x", ",").split(",") if t.strip()]
    try:
        return tuple(int(t) for t in parts)
    except ValueError:
        raise MVFIError(f"--shape expects N,C,H,W integers, got {text!r}") from None


def _parse_progression(text):
    stages = []
    for seg in str(text).split(";"):
        word = seg.strip().lower()
        if word in ("all", "full"):
            stages.append(frozenset(quant.OP_CLASSES))
        else:
            stages.append(quant.parse_op_filter(seg))
    return stages


def load_frames(cfg: RunConfig) -> list[Image]:
    y4m = cfg.get("y4m")
    if y4m:
        frames, _ = frame_io.read_y4m(y4m)
        return [frame_io.yuv420_to_rgb(f) for f in frames]
    frames_dir = cfg.require("frames")
    paths = sorted(p for p in Path(frames_dir).iterdir()
                   if p.suffix in (".png", ".ppm"))
    if not paths:
        raise MVFIError(f"no frames in {frames_dir}")
    return [frame_io.read_frame(p) for p in paths]


def _load_records(cfg: RunConfig):
    return parse_sidecar(Path(cfg.require("mvs")).read_text())


def _synth_spec(cfg: RunConfig) -> SynthSpec:
    w, h = _parse_pair(cfg.get("size", "128x128"), int)
    return SynthSpec(
        pattern=cfg.get("pattern", "smooth-noise"),
        velocity=_parse_pair(cfg.get("velocity", "3,1")),
        size=(w, h),
        mv_noise_sigma=cfg.get_float("noise", 0.0),
        mv_outlier_rate=cfg.get_float("outliers", 0.0),
        seed=cfg.require_int("seed"))


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: RunConfig) -> int:
    out_dir = Path(cfg.require("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _synth_spec(cfg)
    count = cfg.get_int("count", 3)
    ext = cfg.get("format", "png")
    frames, mids = synth.gen_sequence(spec, count)
    w, h = spec.size
    gt = FlowField.from_arrays(np.full((h, w), spec.velocity[0]),
                               np.full((h, w), spec.velocity[1]))
    records = []
    for i in range(1, count):
        per_pair = replace(spec, seed=spec.seed + i)
        records += synth.gen_block_mvs(gt, per_pair, frame_index=i)
    frame_names, mid_names = [], []
    for i, fr in enumerate(frames):
        name = f"frame_{i:04d}.{ext}"
        frame_io.write_frame(fr, out_dir / name)
        frame_names.append(name)
    (out_dir / "gt").mkdir(exist_ok=True)
    for i, fr in enumerate(mids):
        name = f"gtmid_{i:04d}.{ext}"
        frame_io.write_frame(fr, out_dir / "gt" / name)
        mid_names.append(name)
    (out_dir / "sidecar.csv").write_text(serialize_sidecar(records))
    write_json({"command": "synth", "config": cfg.echo(),
                "frames": frame_names, "gt_mids": mid_names,
                "sidecar": "sidecar.csv"}, out_dir / "manifest.json")
    return 0


def _pair_work(frames, records, profile, with_net=None):
    """Build the per-pair closure shared by prealign and interpolate."""

    def work(i):
        t0 = time.perf_counter()
        vectors = select_vectors(records, i + 1)
        if not vectors:
            return i, None, 0.0
        if with_net is not None:
            out = interpolate(frames[i], frames[i + 1], vectors, with_net, profile)
        else:
            out = prealign_pair(frames[i], frames[i + 1], vectors, profile).blend.to_u8()
        return i, out, (time.perf_counter() - t0) * 1e3

    return work


def cmd_prealign(cfg: RunConfig) -> int:
    frames = load_frames(cfg)
    records = _load_records(cfg)
    profile = PROFILES[cfg.get("profile", "production")]
    out_dir = Path(cfg.require("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_dir = cfg.get("gt")
    gt_paths = []
    if gt_dir:
        gt_paths = sorted(p for p in Path(gt_dir).iterdir()
                          if p.suffix in (".png", ".ppm"))
        if len(gt_paths) != len(frames) - 1:
            raise MVFIError(
                f"gt dir {gt_dir} holds {len(gt_paths)} midpoint images "
                f"for {len(frames) - 1} pairs")
    work = _pair_work(frames, records, profile)
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        results = list(ex.map(work, range(len(frames) - 1)))
    rows, timings = [], {}
    for i, blend, ms in results:
        row = {"pair": i, "status": "passthrough" if blend is None else "blended"}
        if blend is not None:
            name = f"blend_{i:04d}.png"
            frame_io.write_png(blend, out_dir / name)
            row["output"] = name
            if gt_paths:
                gt = frame_io.read_frame(gt_paths[i])
                naive = Image.from_array(
                    (frames[i].to_float().data + frames[i + 1].to_float().data) / 2.0).to_u8()
                row["psnr_blend"] = metrics.psnr(blend, gt)
                row["psnr_naive"] = metrics.psnr(naive, gt)
                row["ssim_blend"] = metrics.ssim(blend, gt)
        rows.append(row)
        timings[str(i)] = ms
    write_json({"command": "prealign", "config": cfg.echo(), "pairs": rows},
               out_dir / "manifest.json")
    if cfg.get("report"):
        write_json({"command": "prealign", "config": cfg.echo(), "pairs": rows,
                    "timing": {"per_pair_ms": timings}}, cfg.get("report"))
    return 0


def _build_net(cfg: RunConfig):
    graph_name = cfg.get("graph", "unet-s")
    if graph_name not in CONFIGS:
        raise MVFIError(f"unknown graph {graph_name!r} (have {sorted(CONFIGS)})")
    g = build_unet(CONFIGS[graph_name])
    weights_path = cfg.get("weights")
    if weights_path:
        blob = Path(weights_path).read_bytes()
        try:
            g = load_weights(blob, g)
        except MVFIError:
            # containers saved after folding load into the folded structure
            g = load_weights(blob, fuse_bn(g))
            return g
    if cfg.get("fuse_bn"):
        g = fuse_bn(g)
    return g


def cmd_interpolate(cfg: RunConfig) -> int:
    frames = load_frames(cfg)
    records = _load_records(cfg)
    profile = PROFILES[cfg.get("profile", "production")]
    net = _build_net(cfg)
    out_dir = Path(cfg.require("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    work = _pair_work(frames, records, profile, with_net=net)
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        results = list(ex.map(work, range(len(frames) - 1)))
    rows, timings = [], {}
    for i, mid, ms in results:
        if mid is None:
            rows.append({"pair": i, "status": "passthrough", "output": None})
        else:
            name = f"mid_{i:04d}.png"
            frame_io.write_png(mid, out_dir / name)
            rows.append({"pair": i, "status": "interpolated", "output": name})
        timings[str(i)] = ms
    write_json({"command": "interpolate", "config": cfg.echo(), "pairs": rows},
               out_dir / "manifest.json")
    if cfg.get("report"):
        write_json({"command": "interpolate", "config": cfg.echo(), "pairs": rows,
                    "timing": {"per_pair_ms": timings}}, cfg.get("report"))
    return 0


def cmd_fuse(cfg: RunConfig) -> int:
    graph_name = cfg.get("graph", "unet-s")
    g = build_unet(CONFIGS[graph_name])
    weights_path = cfg.get("weights")
    if weights_path:
        g = load_weights(Path(weights_path).read_bytes(), g)
    fused = fuse_bn(g)
    Path(cfg.require("out")).write_bytes(save_weights(fused))
    bn_left = sum(1 for name in fused.weight_names() if ".bn_" in name)
    print(f"fused {graph_name}: {count_params(g)} -> {count_params(fused)} params, "
          f"{bn_left} bn tensors remain")
    return 0


def cmd_quant(cfg: RunConfig) -> int:
    seed = cfg.require_int("seed")
    graph_name = cfg.get("graph", "accum")
    rng = np.random.default_rng(seed)
    n_inputs = cfg.get_int("inputs", 4)
    if graph_name == "accum":
        g = quant.build_accum_net(seed=seed)
        shape = (1, 8, cfg.get_int("hw", 32), cfg.get_int("hw", 32))
        inputs = [rng.standard_normal(shape) for _ in range(n_inputs)]
    else:
        g = build_unet(CONFIGS[graph_name], seed=seed)
        hw = cfg.get_int("hw", 64)
        inputs = [rng.uniform(0.0, 1.0, (1, 6, hw, hw)) for _ in range(n_inputs)]
    prog_text = cfg.get(
        "progression",
        "conv,convtranspose;conv,convtranspose,add;all")
    progression = _parse_progression(prog_text)
    report = quant.run_instrumented(g, inputs, progression)
    report.update({"command": "quant", "config": cfg.echo(), "seed": seed})
    write_json(report, cfg.require("out"))
    return 0


def cmd_accum_lab(cfg: RunConfig) -> int:
    seed = cfg.require_int("seed")
    report = quant.iter_accum_experiment(
        stages=cfg.get_int("stages", 3),
        state_amplitude=cfg.get_float("amplitude", 19.0),
        trials=cfg.get_int("trials", 20), seed=seed)
    report.update({"command": "accum-lab", "config": cfg.echo(), "seed": seed})
    write_json(report, cfg.require("out"))
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    out = cfg.require("out")
    op = cfg.get("op")
    if op:
        shape = _parse_shape(cfg.get("shape", "1,32,64,64"))
        entry = bench_mod.bench_op(op, shape,
                                   warmup=cfg.get_int("warmup", 10),
                                   iters=cfg.get_int("iters", 50))
        write_json({"command": "bench", "config": cfg.echo(),
                    "entry": entry.to_dict()}, out)
        return 0
    graph_name = cfg.get("graph", "unet-s")
    g = build_unet(CONFIGS[graph_name])
    hw = cfg.get_int("hw", 64)
    rng = np.random.default_rng(cfg.get_int("seed", 0))
    x = rng.uniform(0.0, 1.0, (1, 6, hw, hw))
    report = bench_mod.profile_graph(fuse_bn(g), x,
                                     warmup=cfg.get_int("warmup", 3),
                                     iters=cfg.get_int("iters", 10))
    conv_share = sum(v for k, v in report.class_shares.items()
                     if k in ("CONV", "CONVTRANSPOSE"))
    payload = report.to_dict()
    payload.update({"command": "bench", "config": cfg.echo(),
                    "conv_share_pct": conv_share})
    write_json(payload, out)
    print(f"conv share: {conv_share:.1f}% of per-node median time")
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    seed = cfg.require_int("seed")
    count = cfg.get_int("count", 20)
    rng = np.random.default_rng(seed)
    sums = {name: 0.0 for name in PROFILES}
    sums["naive"] = 0.0
    for t in range(count):
        ang = rng.uniform(0.0, 2.0 * np.pi)
        mag = rng.uniform(4.0, 8.0)
        spec = SynthSpec(
            pattern=cfg.get("pattern", "smooth-noise"),
            velocity=(mag * np.cos(ang), mag * np.sin(ang)),
            size=_parse_pair(cfg.get("size", "96x96"), int),
            mv_noise_sigma=cfg.get_float("noise", 2.0),
            mv_outlier_rate=cfg.get_float("outliers", 0.05),
            seed=seed + t)
        trip = synth.gen_triplet(spec)
        recs = synth.gen_block_mvs(trip.gt_flow, spec)
        vectors = select_vectors(recs, 1)
        naive = Image.from_array(
            (trip.i0.to_float().data + trip.i1.to_float().data) / 2.0).to_u8()
        sums["naive"] += metrics.psnr(naive, trip.it_gt)
        for name, profile in PROFILES.items():
            blend = prealign_pair(trip.i0, trip.i1, vectors, profile).blend.to_u8()
            sums[name] += metrics.psnr(blend, trip.it_gt)
    rows = {name: total / count for name, total in sorted(sums.items())}
    write_json({"command": "ablate", "config": cfg.echo(), "seed": seed,
                "count": count, "mean_psnr_db": rows}, cfg.require("out"))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, with_seed=False):
    p.add_argument("--config", help="KEY=VALUE config file with defaults")
    if with_seed:
        p.add_argument("--seed", type=int, required=True)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvfi",
                                 description="codec-MV frame interpolation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic frames and a sidecar")
    _add_common(p, with_seed=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pattern", choices=synth.PATTERNS)
    p.add_argument("--velocity")
    p.add_argument("--size")
    p.add_argument("--count", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--outliers", type=float)
    p.add_argument("--format", choices=("png", "ppm"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prealign", help="motion-compensated blends for frame pairs")
    _add_common(p)
    p.add_argument("--frames")
    p.add_argument("--y4m")
    p.add_argument("--mvs")
    p.add_argument("--out")
    p.add_argument("--gt")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--report")
    p.set_defaults(func=cmd_prealign)

    p = sub.add_parser("interpolate", help="blend plus residual refinement")
    _add_common(p)
    p.add_argument("--frames")
    p.add_argument("--y4m")
    p.add_argument("--mvs")
    p.add_argument("--out")
    p.add_argument("--graph", choices=sorted(CONFIGS))
    p.add_argument("--weights")
    p.add_argument("--fuse-bn", dest="fuse_bn", action="store_true", default=None)
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--report")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("fuse", help="fold BN into convs in a weights container")
    _add_common(p)
    p.add_argument("--graph", choices=sorted(CONFIGS))
    p.add_argument("--weights")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("quant", help="progressive-quantization instrumentation")
    _add_common(p, with_seed=True)
    p.add_argument("--graph", choices=("accum", "unet-s", "unet-m"))
    p.add_argument("--inputs", type=int)
    p.add_argument("--hw", type=int)
    p.add_argument("--progression",
                   help="semicolon-separated stages, each a comma list of "
                        "op classes, 'none', or 'all'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quant)

    p = sub.add_parser("accum-lab", help="iterative Add quantization experiment")
    _add_common(p, with_seed=True)
    p.add_argument("--stages", type=int)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_accum_lab)

    p = sub.add_parser("bench", help="CPU op microbenchmarks")
    _add_common(p)
    p.add_argument("--op")
    p.add_argument("--shape", help="operator input as N,C,H,W or NxCxHxW")
    p.add_argument("--graph", choices=sorted(CONFIGS))
    p.add_argument("--hw", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="compare smoothing profiles on synthetic sets")
    _add_common(p, with_seed=True)
    p.add_argument("--count", type=int)
    p.add_argument("--size")
    p.add_argument("--pattern", choices=synth.PATTERNS)
    p.add_argument("--noise", type=float)
    p.add_argument("--outliers", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    cfg = build_run_config(args)
    try:
        return args.func(cfg)
    except (MVFIError, OSError) as exc:
        print(f"mvfi: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
