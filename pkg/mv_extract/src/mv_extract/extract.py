"""Extraction jobs: decoded streams to sidecar CSV, frames, and manifest."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import drivers
from .errors import InvalidJob
from .gop import FrameInfo, ref_distance
from .sidecar import vector_row, write_sidecar

MODES = ("stream", "per-triplet")

X264_PRESETS = ("ultrafast", "superfast", "veryfast", "faster", "fast",
                "medium", "slow", "slower", "veryslow")


@dataclass(frozen=True)
class EncodeSettings:
    preset: str = "medium"
    bframes: int = 0
    crf: int = 18
    keyint: int = 250

    def __post_init__(self):
        if self.preset not in X264_PRESETS:
            raise InvalidJob(f"unknown preset {self.preset!r}")
        if self.bframes < 0:
            raise InvalidJob(f"bframes must be >= 0, got {self.bframes}")
        if not 0 <= self.crf <= 51:
            raise InvalidJob(f"crf must be in [0, 51], got {self.crf}")
        if self.keyint < 1:
            raise InvalidJob(f"keyint must be >= 1, got {self.keyint}")


@dataclass(frozen=True)
class ExtractJob:
    input_path: Path
    out_dir: Path
    mode: str = "stream"
    settings: EncodeSettings = field(default_factory=EncodeSettings)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidJob(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "input_path", Path(self.input_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))


@dataclass(frozen=True)
class ExtractResult:
    sidecar_path: Path
    frames_dir: Path
    manifest_path: Path
    frame_count: int
    mv_counts: tuple[int, ...]


@dataclass(frozen=True)
class TripletResult:
    clip_path: Path
    sidecar_path: Path
    n_vectors: int


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_frames(frames, out_dir: Path) -> None:
    for f in frames:
        Image.fromarray(f.rgb, mode="RGB").save(out_dir / f"{f.index:06d}.png")


def _rows_for_frames(frames) -> tuple[list[str], list[int]]:
    infos = [FrameInfo(f.pict_type, f.is_reference) for f in frames]
    rows: list[str] = []
    counts: list[int] = []
    for f in frames:
        for vec in f.vectors:
            d = ref_distance(infos, f.index, vec.source)
            rows.append(vector_row(f.index, vec, d))
        counts.append(len(f.vectors))
    return rows, counts


def extract_stream(job: ExtractJob) -> ExtractResult:
    """Decode a stream and emit sidecar CSV, PNG frames, and a manifest."""
    if not job.input_path.is_file():
        raise InvalidJob(f"input not found: {job.input_path}")
    if job.mode == "per-triplet" and job.settings.bframes != 0:
        raise InvalidJob("per-triplet mode requires bframes=0")
    if not drivers.decoder_available():
        raise EnvironmentError(drivers.DECODER_HINT)
    if job.mode == "per-triplet" and not drivers.encode_route_available():
        raise EnvironmentError(drivers.ENCODER_HINT)

    job.out_dir.mkdir(parents=True, exist_ok=True)
    frames = drivers.decode_with_mvs(job.input_path)
    codec = drivers.stream_codec_name(job.input_path)

    if job.mode == "stream":
        rows, counts = _rows_for_frames(frames)
    else:
        rows, counts = _per_triplet_rows(job, frames)

    _write_frames(frames, job.out_dir)
    sidecar = write_sidecar(job.out_dir / "sidecar.csv", rows)
    manifest: dict = {
        "codec": codec,
        "frame_count": len(frames),
        "input": job.input_path.name,
        "mode": job.mode,
        "mv_counts": counts,
    }
    if frames and not any(counts):
        manifest["note"] = "no inter frames"
    manifest_path = job.out_dir / "manifest.json"
    _write_json(manifest_path, manifest)
    return ExtractResult(
        sidecar_path=sidecar,
        frames_dir=job.out_dir,
        manifest_path=manifest_path,
        frame_count=len(frames),
        mv_counts=tuple(counts),
    )


def _encode_and_decode_pair(i0: np.ndarray, i1: np.ndarray, clip_path: Path,
                            settings: EncodeSettings):
    clip = drivers.encode_h264([i0, i1], clip_path, settings)
    return clip, drivers.decode_with_mvs(clip)


def _per_triplet_rows(job: ExtractJob, frames) -> tuple[list[str], list[int]]:
    # each consecutive pair is re-encoded as a fresh 2-frame clip so the
    # second frame carries clean single-reference vectors (d_ref = 1)
    clip_dir = job.out_dir / "clips"
    clip_dir.mkdir(parents=True, exist_ok=True)
    rows: list[str] = []
    counts = [0] * len(frames)
    for i in range(len(frames) - 1):
        _, pair_frames = _encode_and_decode_pair(
            frames[i].rgb, frames[i + 1].rgb,
            clip_dir / f"pair_{i:06d}.mp4", job.settings)
        for f in pair_frames[1:]:
            for vec in f.vectors:
                rows.append(vector_row(i + 1, vec, 1))
                counts[i + 1] += 1
    return rows, counts


def _validate_pair(i0: np.ndarray, i1: np.ndarray) -> None:
    for name, arr in (("i0", i0), ("i1", i1)):
        if not isinstance(arr, np.ndarray) or arr.dtype != np.uint8:
            raise InvalidJob(f"{name} must be a uint8 array")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidJob(f"{name} must be HxWx3, got {arr.shape}")
    if i0.shape != i1.shape:
        raise InvalidJob(f"frame shapes differ: {i0.shape} vs {i1.shape}")
    h, w = i0.shape[:2]
    if h % 2 or w % 2:
        raise InvalidJob(f"4:2:0 encoding needs even dimensions, got {w}x{h}")


def encode_triplet(i0: np.ndarray, i1: np.ndarray, workdir: Path,
                   settings: EncodeSettings | None = None,
                   clip_name: str = "pair.mp4") -> TripletResult:
    """Encode [i0, i1] as a 2-frame clip and extract the inter-frame vectors."""
    settings = settings if settings is not None else EncodeSettings()
    if settings.bframes != 0:
        raise InvalidJob("two-frame encoding requires bframes=0")
    _validate_pair(i0, i1)
    if not drivers.encoder_available():
        raise EnvironmentError(drivers.ENCODER_HINT)

    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    clip, frames = _encode_and_decode_pair(i0, i1, workdir / clip_name, settings)
    rows, _ = _rows_for_frames(frames)
    sidecar = write_sidecar(clip.with_suffix(".csv"), rows)
    return TripletResult(clip_path=clip, sidecar_path=sidecar,
                         n_vectors=len(rows))
