"""Still-frame and Y4M stream I/O.

Color conversion for Y4M is BT.601 limited range with fixed
coefficients: Kr = 0.299, Kg = 0.587, Kb = 0.114; luma spans 16..235,
chroma 16..240 centered at 128.  Chroma is 4:2:0, subsampled by a 2x2
box average before rounding and replicated on upsampling.  Y4M
round-trips are sample-identical at the YUV level; RGB round-trips are
lossy by nature of 4:2:0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .core_types import Image
from .errors import InvalidInput, ParseError


def write_png(img: Image, path) -> None:
    u8 = img.to_u8()
    mode = "RGB" if u8.channels == 3 else "L"
    data = u8.data if u8.channels == 3 else u8.data[:, :, 0]
    PILImage.fromarray(data, mode=mode).save(path, format="PNG")


def read_png(path) -> Image:
    with PILImage.open(path) as im:
        im = im.convert("RGB")
        return Image.from_array(np.asarray(im))


def write_ppm(img: Image, path) -> None:
    u8 = img.to_u8()
    if u8.channels != 3:
        raise InvalidInput("ppm output needs 3 channels")
    with open(path, "wb") as f:
        f.write(f"P6\n{u8.width} {u8.height}\n255\n".encode())
        f.write(u8.data.tobytes())


def read_ppm(path) -> Image:
    with open(path, "rb") as f:
        blob = f.read()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", blob)
    if not m:
        raise ParseError("not a binary P6 ppm with maxval 255")
    w, h = int(m.group(1)), int(m.group(2))
    data = np.frombuffer(blob[m.end():m.end() + w * h * 3], dtype=np.uint8)
    if data.size != w * h * 3:
        raise ParseError("truncated ppm payload")
    return Image.from_array(data.reshape(h, w, 3).copy())


def write_frame(img: Image, path) -> None:
    path = str(path)
    if path.endswith(".ppm"):
        write_ppm(img, path)
    else:
        write_png(img, path)


def read_frame(path) -> Image:
    path = str(path)
    if path.endswith(".ppm"):
        return read_ppm(path)
    return read_png(path)


# ---------------------------------------------------------------------------
# Y4M


@dataclass(frozen=True)
class YuvFrame:
    """Planar 4:2:0 frame: y is (H, W), u and v are (H/2, W/2), uint8."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        h, w = self.y.shape
        if h % 2 or w % 2:
            raise InvalidInput("4:2:0 frames need even dims")
        if self.u.shape != (h // 2, w // 2) or self.v.shape != (h // 2, w // 2):
            raise InvalidInput("chroma plane shape mismatch")


def write_y4m(frames: list[YuvFrame], path, fps: tuple[int, int] = (25, 1)) -> None:
    if not frames:
        raise InvalidInput("no frames to write")
    h, w = frames[0].y.shape
    with open(path, "wb") as f:
        f.write(f"YUV4MPEG2 W{w} H{h} F{fps[0]}:{fps[1]} Ip A1:1 C420\n".encode())
        for fr in frames:
            if fr.y.shape != (h, w):
                raise InvalidInput("frame size changed mid-stream")
            f.write(b"FRAME\n")
            f.write(fr.y.tobytes())
            f.write(fr.u.tobytes())
            f.write(fr.v.tobytes())


def read_y4m(path) -> tuple[list[YuvFrame], dict]:
    with open(path, "rb") as f:
        blob = f.read()
    nl = blob.find(b"\n")
    if nl < 0 or not blob.startswith(b"YUV4MPEG2"):
        raise ParseError("not a y4m stream")
    meta: dict = {"fps": (25, 1)}
    w = h = 0
    for tok in blob[:nl].decode("ascii", "replace").split()[1:]:
        if tok[0] == "W":
            w = int(tok[1:])
        elif tok[0] == "H":
            h = int(tok[1:])
        elif tok[0] == "F":
            num, den = tok[1:].split(":")
            meta["fps"] = (int(num), int(den))
        elif tok[0] == "C":
            if not tok[1:].startswith("420"):
                raise ParseError(f"unsupported chroma mode {tok!r}")
    if w <= 0 or h <= 0:
        raise ParseError("missing W or H in y4m header")
    meta["width"], meta["height"] = w, h
    frames = []
    pos = nl + 1
    ysize, csize = w * h, (w // 2) * (h // 2)
    while pos < len(blob):
        fnl = blob.find(b"\n", pos)
        if fnl < 0 or not blob[pos:fnl].startswith(b"FRAME"):
            raise ParseError(f"bad FRAME marker at offset {pos}")
        pos = fnl + 1
        need = ysize + 2 * csize
        if pos + need > len(blob):
            raise ParseError("truncated y4m frame payload")
        y = np.frombuffer(blob[pos:pos + ysize], dtype=np.uint8).reshape(h, w)
        pos += ysize
        u = np.frombuffer(blob[pos:pos + csize], dtype=np.uint8).reshape(h // 2, w // 2)
        pos += csize
        v = np.frombuffer(blob[pos:pos + csize], dtype=np.uint8).reshape(h // 2, w // 2)
        pos += csize
        frames.append(YuvFrame(y=y.copy(), u=u.copy(), v=v.copy()))
    return frames, meta


def _round_u8(v: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)


def rgb_to_yuv420(img: Image) -> YuvFrame:
    """BT.601 limited-range conversion with 2x2 box chroma subsampling."""
    u8 = img.to_u8()
    if u8.channels != 3:
        raise InvalidInput("expected 3 channels")
    if u8.height % 2 or u8.width % 2:
        raise InvalidInput("4:2:0 needs even dims")
    rgb = u8.data.astype(np.float64) / 255.0
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    ly = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - ly) / 1.772
    cr = (r - ly) / 1.402
    y = _round_u8(16.0 + 219.0 * ly)
    cb = cb.reshape(u8.height // 2, 2, u8.width // 2, 2).mean(axis=(1, 3))
    cr = cr.reshape(u8.height // 2, 2, u8.width // 2, 2).mean(axis=(1, 3))
    u = _round_u8(128.0 + 224.0 * cb)
    v = _round_u8(128.0 + 224.0 * cr)
    return YuvFrame(y=y, u=u, v=v)


def yuv420_to_rgb(fr: YuvFrame) -> Image:
    """Inverse of rgb_to_yuv420 with nearest chroma upsampling."""
    ly = (fr.y.astype(np.float64) - 16.0) / 219.0
    cb = (np.repeat(np.repeat(fr.u, 2, axis=0), 2, axis=1).astype(np.float64)
          - 128.0) / 224.0
    cr = (np.repeat(np.repeat(fr.v, 2, axis=0), 2, axis=1).astype(np.float64)
          - 128.0) / 224.0
    r = ly + 1.402 * cr
    b = ly + 1.772 * cb
    g = (ly - 0.299 * r - 0.114 * b) / 0.587
    rgb = np.stack([r, g, b], axis=2)
    return Image.from_array(_round_u8(rgb * 255.0))
