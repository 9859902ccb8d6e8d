"""Sidecar CSV emission.

The CSV layout is the external contract consumed by the interpolation
toolkit; all motion values pass through raw (sign and scale untouched) so
exactly one component owns their normalization.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import InvalidJob

HEADER = ("framenum,source,blockw,blockh,srcx,srcy,dstx,dsty,"
          "flags,motion_x,motion_y,motion_scale,d_ref")


@dataclass(frozen=True)
class RawVector:
    """One decoder-exported block vector, positions anchored at the block centre."""

    source: int
    w: int
    h: int
    src_x: int
    src_y: int
    dst_x: int
    dst_y: int
    motion_x: int
    motion_y: int
    motion_scale: int
    flags: int = 0

    def __post_init__(self):
        if self.source not in (-1, 1):
            raise InvalidJob(f"source must be -1 or +1, got {self.source}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidJob(f"block size must be positive, got {self.w}x{self.h}")
        if self.motion_scale <= 0:
            raise InvalidJob(f"motion_scale must be positive, got {self.motion_scale}")
        if self.flags < 0:
            raise InvalidJob(f"flags must be non-negative, got {self.flags}")


def vector_row(framenum: int, vec: RawVector, d_ref: int) -> str:
    if framenum < 0:
        raise InvalidJob(f"framenum must be non-negative, got {framenum}")
    if d_ref < 1:
        raise InvalidJob(f"d_ref must be >= 1, got {d_ref}")
    # decoder positions are block centres; the sidecar wants top-left corners
    fields = (
        framenum, vec.source, vec.w, vec.h,
        vec.src_x - vec.w // 2, vec.src_y - vec.h // 2,
        vec.dst_x - vec.w // 2, vec.dst_y - vec.h // 2,
        hex(vec.flags),
        vec.motion_x, vec.motion_y, vec.motion_scale, d_ref,
    )
    return ",".join(str(f) for f in fields)


def sidecar_text(rows: Iterable[str]) -> str:
    return "\n".join([HEADER, *rows]) + "\n"


def write_sidecar(path: Path, rows: Iterable[str]) -> Path:
    path = Path(path)
    path.write_text(sidecar_text(rows), encoding="utf-8")
    return path
