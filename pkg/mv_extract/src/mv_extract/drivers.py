"""Optional codec backends.

Numeric motion-vector side data is only reachable through the libav
library API (PyAV); the ffmpeg binary can encode and decode pictures but
only draws vectors, so it serves as an encode fallback. Every probe is
cached and every failure path names the missing tool.
"""
from __future__ import annotations

import functools
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExtractError, UnsupportedCodecError
from .sidecar import RawVector

MV_CODECS = ("h264", "mpeg1video", "mpeg2video", "mpeg4")

DECODER_HINT = ("numeric motion-vector side data needs PyAV: pip install av")
ENCODER_HINT = ("no H.264 round-trip route: install PyAV (pip install av) "
                "for encode plus motion-vector export, or an ffmpeg binary "
                "with libx264 on PATH for the encode step alone")


@functools.lru_cache(maxsize=1)
def _av_module():
    try:
        import av
        return av
    except ImportError:
        return None


@functools.lru_cache(maxsize=1)
def _ffmpeg_binary() -> str | None:
    return shutil.which("ffmpeg")


@functools.lru_cache(maxsize=1)
def _av_h264_encoder() -> str | None:
    av = _av_module()
    if av is None:
        return None
    for name in ("libx264", "h264", "libopenh264"):
        try:
            av.codec.Codec(name, "w")
            return name
        except Exception:
            continue
    return None


def decoder_available() -> bool:
    return _av_module() is not None


def encode_route_available() -> bool:
    return _av_h264_encoder() is not None or _ffmpeg_binary() is not None


def encoder_available() -> bool:
    """True when the full encode -> decode -> MV-export loop can run here."""
    return decoder_available() and encode_route_available()


@dataclass(frozen=True)
class DecodedFrame:
    index: int
    pict_type: str
    is_reference: bool
    rgb: np.ndarray
    vectors: tuple[RawVector, ...]


def _vector_from_side_data(m) -> RawVector:
    return RawVector(
        source=int(m.source), w=int(m.w), h=int(m.h),
        src_x=int(m.src_x), src_y=int(m.src_y),
        dst_x=int(m.dst_x), dst_y=int(m.dst_y),
        motion_x=int(m.motion_x), motion_y=int(m.motion_y),
        motion_scale=int(m.motion_scale),
        flags=int(getattr(m, "flags", 0)),
    )


def decode_with_mvs(path: Path) -> list[DecodedFrame]:
    av = _av_module()
    if av is None:
        raise EnvironmentError(DECODER_HINT)
    container = av.open(str(path))
    try:
        streams = container.streams.video
        if not streams:
            raise ExtractError(f"no video stream in {path}")
        stream = streams[0]
        codec = stream.codec_context.name
        if codec not in MV_CODECS:
            raise UnsupportedCodecError(codec)
        stream.codec_context.options = {"flags2": "+export_mvs"}
        frames: list[DecodedFrame] = []
        for frame in container.decode(stream):
            side = frame.side_data.get("MOTION_VECTORS")
            vectors = tuple(_vector_from_side_data(m) for m in side) if side else ()
            pict = getattr(frame.pict_type, "name", str(frame.pict_type))
            frames.append(DecodedFrame(
                index=len(frames),
                pict_type=pict if pict in ("I", "P", "B") else "P",
                is_reference=pict != "B",
                rgb=frame.to_ndarray(format="rgb24"),
                vectors=vectors,
            ))
        return frames
    finally:
        container.close()


def stream_codec_name(path: Path) -> str:
    av = _av_module()
    if av is None:
        raise EnvironmentError(DECODER_HINT)
    with av.open(str(path)) as container:
        streams = container.streams.video
        if not streams:
            raise ExtractError(f"no video stream in {path}")
        return streams[0].codec_context.name


def _x264_params(settings) -> str:
    return f"bframes={settings.bframes}:keyint={settings.keyint}:ref=1"


def _encode_with_av(frames_rgb: list[np.ndarray], out_path: Path, settings) -> None:
    av = _av_module()
    codec = _av_h264_encoder()
    h, w = frames_rgb[0].shape[:2]
    with av.open(str(out_path), "w") as container:
        stream = container.add_stream(codec, rate=30)
        stream.width = w
        stream.height = h
        stream.pix_fmt = "yuv420p"
        stream.options = {
            "preset": settings.preset,
            "crf": str(settings.crf),
            "x264-params": _x264_params(settings),
        }
        for arr in frames_rgb:
            frame = av.VideoFrame.from_ndarray(arr, format="rgb24")
            for packet in stream.encode(frame):
                container.mux(packet)
        for packet in stream.encode(None):
            container.mux(packet)


def _encode_with_ffmpeg(frames_rgb: list[np.ndarray], out_path: Path, settings) -> None:
    from PIL import Image

    binary = _ffmpeg_binary()
    with tempfile.TemporaryDirectory() as tmp:
        for i, arr in enumerate(frames_rgb):
            Image.fromarray(arr, mode="RGB").save(Path(tmp) / f"{i:06d}.png")
        cmd = [
            binary, "-hide_banner", "-loglevel", "error", "-y",
            "-framerate", "30", "-i", str(Path(tmp) / "%06d.png"),
            "-c:v", "libx264", "-preset", settings.preset,
            "-crf", str(settings.crf),
            "-x264-params", _x264_params(settings),
            "-pix_fmt", "yuv420p", str(out_path),
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ExtractError(f"ffmpeg encode failed: {proc.stderr.strip()}")


def encode_h264(frames_rgb: list[np.ndarray], out_path: Path, settings) -> Path:
    if not encode_route_available():
        raise EnvironmentError(ENCODER_HINT)
    out_path = Path(out_path)
    if _av_h264_encoder() is not None:
        _encode_with_av(frames_rgb, out_path, settings)
    else:
        _encode_with_ffmpeg(frames_rgb, out_path, settings)
    return out_path
