import json
import os
from pathlib import Path

import numpy as np
import pytest

from mvfi.cli import (build_run_config, load_config_file, main, make_parser,
                      thread_count, write_json)
from mvfi.errors import MVFIError
from mvfi.frame_io import read_png, read_y4m, rgb_to_yuv420, write_y4m
from mvfi.mv_ingest import HEADER, parse_sidecar
from mvfi.nnet import CONFIGS, build_unet, load_weights, save_weights
from mvfi.synth import SynthSpec, gen_sequence


def _run(*argv):
    return main([str(a) for a in argv])


def _synth(tmp_path, seed=11, velocity="2,1", extra=()):
    out = tmp_path / f"seq{seed}"
    rc = _run("synth", "--seed", seed, "--out", out, "--size", "64x48",
              "--velocity", velocity, "--count", "4", *extra)
    assert rc == 0
    return out


def test_config_file_parsing(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# defaults\nVELOCITY = 5,0\npattern=checkerboard\n\n")
    cfg = load_config_file(p)
    assert cfg == {"velocity": "5,0", "pattern": "checkerboard"}
    p.write_text("not a pair\n")
    with pytest.raises(MVFIError):
        load_config_file(p)


def test_flags_override_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("velocity=5,0\nsize=32x32\n")
    args = make_parser().parse_args(
        ["synth", "--config", str(p), "--seed", "1", "--out", "o",
         "--velocity", "2,0"])
    cfg = build_run_config(args)
    assert cfg.get("velocity") == "2,0"  # flag wins
    assert cfg.get("size") == "32x32"  # file fills the gap
    with pytest.raises(MVFIError):
        cfg.require("mvs")


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("MVFI_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("MVFI_THREADS", "8")
    assert thread_count() == 8
    monkeypatch.setenv("MVFI_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("MVFI_THREADS", "junk")
    assert thread_count() == 1
    monkeypatch.setenv("MVFI_THREADS", "9999")
    assert thread_count() == 64


def test_synth_outputs(tmp_path):
    out = _synth(tmp_path)
    frames = sorted(out.glob("frame_*.png"))
    mids = sorted((out / "gt").glob("gtmid_*.png"))
    assert len(frames) == 4 and len(mids) == 3
    records = parse_sidecar((out / "sidecar.csv").read_text())
    assert {r.frame_index for r in records} == {1, 2, 3}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["frames"] == [f"frame_{i:04d}.png" for i in range(4)]
    assert manifest["config"]["seed"] == 11


def test_synth_reproducible(tmp_path):
    a = _synth(tmp_path / "a")
    b = _synth(tmp_path / "b")
    for name in ["frame_0001.png", "sidecar.csv", "gt/gtmid_0000.png"]:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_prealign_reports_metrics(tmp_path):
    src = _synth(tmp_path, seed=12, velocity="4,2")
    out = tmp_path / "pre"
    rep = tmp_path / "report.json"
    rc = _run("prealign", "--frames", src, "--mvs", src / "sidecar.csv",
              "--out", out, "--gt", src / "gt", "--profile", "production",
              "--report", rep)
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["pairs"]) == 3
    for row in manifest["pairs"]:
        assert row["status"] == "blended"
        assert row["psnr_blend"] > row["psnr_naive"]
        assert 0.0 < row["ssim_blend"] <= 1.0
    report = json.loads(rep.read_text())
    assert set(report["timing"]["per_pair_ms"]) == {"0", "1", "2"}
    assert "timing" not in manifest


def test_prealign_rejects_mismatched_gt_dir(tmp_path, capfd):
    # pointing --gt at the sequence root must fail loudly, not compare
    # blends against the input frames
    src = _synth(tmp_path, seed=21, velocity="4,2")
    rc = _run("prealign", "--frames", src, "--mvs", src / "sidecar.csv",
              "--out", tmp_path / "pre", "--gt", src)
    assert rc == 1
    assert "midpoint images" in capfd.readouterr().err


def test_prealign_zoh_vs_production(tmp_path):
    src = _synth(tmp_path, seed=13, extra=("--noise", "2.0",
                                           "--outliers", "0.05"))
    psnrs = {}
    for profile in ("zoh", "production"):
        out = tmp_path / profile
        rc = _run("prealign", "--frames", src, "--mvs", src / "sidecar.csv",
                  "--out", out, "--gt", src / "gt", "--profile", profile)
        assert rc == 0
        rows = json.loads((out / "manifest.json").read_text())["pairs"]
        psnrs[profile] = np.mean([r["psnr_blend"] for r in rows])
    assert psnrs["production"] > psnrs["zoh"]


def test_prealign_empty_sidecar_passthrough(tmp_path):
    src = _synth(tmp_path, seed=14)
    empty = tmp_path / "empty.csv"
    empty.write_text(HEADER + "\n")
    out = tmp_path / "pre"
    rc = _run("prealign", "--frames", src, "--mvs", empty, "--out", out)
    assert rc == 0
    rows = json.loads((out / "manifest.json").read_text())["pairs"]
    assert all(r["status"] == "passthrough" for r in rows)
    assert not list(out.glob("*.png"))


def test_prealign_reads_y4m(tmp_path):
    spec = SynthSpec(velocity=(2.0, 0.0), size=(32, 32), seed=15)
    frames, _ = gen_sequence(spec, 3)
    clip = tmp_path / "in.y4m"
    write_y4m([rgb_to_yuv420(f) for f in frames], clip)
    empty = tmp_path / "empty.csv"
    empty.write_text(HEADER + "\n")
    out = tmp_path / "pre"
    assert _run("prealign", "--y4m", clip, "--mvs", empty, "--out", out) == 0
    rows = json.loads((out / "manifest.json").read_text())["pairs"]
    assert len(rows) == 2


def test_interpolate_zero_init_equals_prealign_blend(tmp_path):
    src = _synth(tmp_path, seed=16)
    blend_dir, mid_dir = tmp_path / "blend", tmp_path / "mid"
    assert _run("prealign", "--frames", src, "--mvs", src / "sidecar.csv",
                "--out", blend_dir) == 0
    assert _run("interpolate", "--frames", src, "--mvs", src / "sidecar.csv",
                "--out", mid_dir, "--graph", "unet-s") == 0
    manifest = json.loads((mid_dir / "manifest.json").read_text())
    assert sum(r["status"] == "interpolated" for r in manifest["pairs"]) == 3
    for i in range(3):
        a = (blend_dir / f"blend_{i:04d}.png").read_bytes()
        b = (mid_dir / f"mid_{i:04d}.png").read_bytes()
        assert a == b


def test_interpolate_threads_deterministic(tmp_path, monkeypatch):
    src = _synth(tmp_path, seed=17, extra=("--noise", "1.0"))
    outputs = {}
    for threads in ("1", "8"):
        monkeypatch.setenv("MVFI_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert _run("interpolate", "--frames", src, "--mvs",
                    src / "sidecar.csv", "--out", out) == 0
        outputs[threads] = [p.read_bytes() for p in sorted(out.glob("*.png"))]
    assert outputs["1"] == outputs["8"]
    assert len(outputs["1"]) == 3


def test_fuse_writes_loadable_container(tmp_path, capsys):
    out = tmp_path / "fused.bin"
    assert _run("fuse", "--graph", "unet-s", "--out", out) == 0
    said = capsys.readouterr().out
    assert "0 bn tensors remain" in said
    blob = out.read_bytes()
    assert blob.startswith(b"MVFIWGT1")
    from mvfi.nnet import UNET_S, fuse_bn
    fused = load_weights(blob, fuse_bn(build_unet(UNET_S)))
    assert all(".bn_" not in k for k in fused.weights)


def test_interpolate_with_fused_weights_matches(tmp_path):
    # --fuse-bn on identity-BN weights cannot change the 8-bit frames
    src = _synth(tmp_path, seed=18)
    w = tmp_path / "w.bin"
    w.write_bytes(save_weights(build_unet(CONFIGS["unet-s"])))
    frames = {}
    for label, extra in (("raw", ()), ("fused", ("--fuse-bn",))):
        out = tmp_path / label
        assert _run("interpolate", "--frames", src, "--mvs",
                    src / "sidecar.csv", "--out", out, "--weights", w,
                    *extra) == 0
        frames[label] = [p.read_bytes() for p in sorted(out.glob("*.png"))]
    assert frames["raw"] == frames["fused"]


def test_quant_report(tmp_path):
    out = tmp_path / "quant.json"
    assert _run("quant", "--seed", "19", "--graph", "accum", "--inputs", "2",
                "--hw", "16", "--out", out) == 0
    report = json.loads(out.read_text())
    rows = {r["filter"]: r["cos_sim_mean"] for r in report["rows"]}
    assert rows["none"] == 1.0
    assert rows["conv,convtranspose,add"] < rows["conv,convtranspose"]


def test_accum_lab_report(tmp_path):
    out = tmp_path / "lab.json"
    assert _run("accum-lab", "--seed", "20", "--stages", "2", "--trials", "3",
                "--out", out) == 0
    report = json.loads(out.read_text())
    rows = {(r["amplitude"], r["stage"]): r["cos_sim"] for r in report["rows"]}
    for stage in (1, 2):
        assert rows[(19.0, stage)] < rows[(1.0, stage)]


def test_bench_single_op(tmp_path):
    out = tmp_path / "bench.json"
    assert _run("bench", "--op", "add", "--shape", "1,4,16,16",
                "--warmup", "1", "--iters", "5", "--out", out) == 0
    entry = json.loads(out.read_text())["entry"]
    assert entry["name"] == "add"
    assert entry["min_ns"] > 0


def test_quant_progression_aliases(tmp_path):
    # "none" and "all" segments are accepted; "all" covers every op class
    out = tmp_path / "quant.json"
    assert _run("quant", "--seed", "19", "--graph", "accum", "--inputs", "2",
                "--hw", "16", "--progression", "none;conv;conv,add;all",
                "--out", out) == 0
    labels = [r["filter"] for r in json.loads(out.read_text())["rows"]]
    assert labels == ["none", "conv", "conv,add",
                      "conv,convtranspose,relu_like,add"]


def test_bench_shape_accepts_x_separator(tmp_path):
    out = tmp_path / "bench.json"
    assert _run("bench", "--op", "add", "--shape", "1x4x16x16",
                "--warmup", "1", "--iters", "5", "--out", out) == 0
    assert json.loads(out.read_text())["entry"]["shape"] == [1, 4, 16, 16]


def test_bad_numeric_config_value_reports_cleanly(tmp_path, capsys):
    # config-file values arrive as strings and bypass argparse typing
    cfg = tmp_path / "run.cfg"
    cfg.write_text("hw=abc\n")
    out = tmp_path / "quant.json"
    assert _run("quant", "--config", cfg, "--seed", "19", "--out", out) == 1
    err = capsys.readouterr().err
    assert "mvfi: error:" in err
    assert "--hw" in err and "'abc'" in err
    assert "Traceback" not in err


def test_bad_shape_reports_cleanly(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert _run("bench", "--op", "add", "--shape", "1,banana,16,16",
                "--out", out) == 1
    err = capsys.readouterr().err
    assert "mvfi: error:" in err and "--shape" in err


def test_ablate_orders_profiles(tmp_path):
    out = tmp_path / "ablate.json"
    assert _run("ablate", "--seed", "21", "--count", "4",
                "--out", out) == 0
    rows = json.loads(out.read_text())["mean_psnr_db"]
    assert set(rows) == {"zoh", "v1", "obmc", "production", "naive"}
    assert rows["production"] >= rows["zoh"]
    assert rows["production"] > rows["naive"]


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    assert _run("prealign", "--frames", tmp_path / "missing",
                "--mvs", tmp_path / "nope.csv", "--out", tmp_path / "o") == 1
    assert "mvfi: error:" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,sidecar\n")
    src = _synth(tmp_path, seed=22)
    assert _run("prealign", "--frames", src, "--mvs", bad,
                "--out", tmp_path / "o2") == 1


def test_write_json_stable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_json({"b": 1, "a": [1, 2]}, a)
    write_json({"a": [1, 2], "b": 1}, b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().endswith("\n")
