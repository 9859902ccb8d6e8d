"""Sidecar motion-vector ingestion.

The sidecar is a CSV stream, one row per exported block vector:

    framenum,source,blockw,blockh,srcx,srcy,dstx,dsty,flags,motion_x,motion_y,motion_scale,d_ref

All columns are decimal integers except flags, which is hexadecimal
(0x...), ignored on read and preserved verbatim on write.  Vectors point
from the current frame toward the reference: for a forward-predicted
frame with source = -1 the forward flow of a block is the negated,
de-scaled motion (dx = -motion_x / motion_scale).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import ParseError

HEADER = "framenum,source,blockw,blockh,srcx,srcy,dstx,dsty,flags,motion_x,motion_y,motion_scale,d_ref"

_VALID_BLOCK = (4, 8, 16)


@dataclass(frozen=True)
class MVRecord:
    """One block vector as stored in the sidecar."""

    frame_index: int      # decode-order index of the predicted frame
    source: int           # -1 past reference, +1 future reference
    block_w: int
    block_h: int
    src_x: int            # block origin in the reference frame
    src_y: int
    dst_x: int            # block top-left in the current frame
    dst_y: int
    motion_x: int         # displacement in 1/motion_scale pixel units
    motion_y: int
    motion_scale: int
    d_ref: int            # decode-order distance to the reference
    flags: str = "0x0"    # opaque, preserved for round-trips

    def __post_init__(self):
        if not isinstance(self.flags, str) or not self.flags.startswith("0x"):
            raise ParseError(f"flags must be a hex string, got {self.flags!r}")
        if self.source not in (-1, 1):
            raise ParseError(f"source must be -1 or +1, got {self.source}")
        if self.block_w not in _VALID_BLOCK or self.block_h not in _VALID_BLOCK:
            raise ParseError(
                f"block size {self.block_w}x{self.block_h} not in {{4,8,16}}")
        if self.motion_scale < 1:
            raise ParseError(f"motion_scale must be >= 1, got {self.motion_scale}")
        if self.d_ref < 1:
            raise ParseError(f"d_ref must be >= 1, got {self.d_ref}")


@dataclass(frozen=True)
class BlockVector:
    """A selected block with its displacement in pixels (forward flow)."""

    x0: int
    y0: int
    w: int
    h: int
    dx: float
    dy: float


def parse_sidecar(text: str) -> list[MVRecord]:
    """Parse a sidecar CSV document. Raises ParseError with a line number."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ParseError("missing or malformed header", line=1)
    records = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 13:
            raise ParseError(f"expected 13 fields, got {len(fields)}", line=lineno)
        try:
            (framenum, source, blockw, blockh, srcx, srcy, dstx, dsty) = (
                int(f) for f in fields[:8])
            flags = fields[8]
            if not flags.startswith("0x"):
                raise ValueError(f"flags must be hexadecimal, got {flags!r}")
            int(flags, 16)
            motion_x, motion_y, motion_scale, d_ref = (int(f) for f in fields[9:])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        try:
            rec = MVRecord(
                frame_index=framenum, source=source,
                block_w=blockw, block_h=blockh,
                src_x=srcx, src_y=srcy, dst_x=dstx, dst_y=dsty,
                motion_x=motion_x, motion_y=motion_y,
                motion_scale=motion_scale, d_ref=d_ref, flags=flags)
        except ParseError as exc:
            raise ParseError(str(exc), line=lineno) from None
        records.append(rec)
    return records


def serialize_sidecar(records: Iterable[MVRecord]) -> str:
    """Canonical sidecar text; parse -> serialize round-trips bit-identically."""
    out = [HEADER]
    for r in records:
        out.append(
            f"{r.frame_index},{r.source},{r.block_w},{r.block_h},"
            f"{r.src_x},{r.src_y},{r.dst_x},{r.dst_y},{r.flags},"
            f"{r.motion_x},{r.motion_y},{r.motion_scale},{r.d_ref}")
    return "\n".join(out) + "\n"


def select_vectors(records: Iterable[MVRecord], frame_index: int,
                   d_ref_max: int = 1) -> list[BlockVector]:
    """Block vectors usable as forward flow for one predicted frame.

    Keeps records for frame_index with a past reference (source = -1) and
    reference distance <= d_ref_max, in input order.  The codec motion
    points from the current block back to its match in the reference, so
    the forward displacement is the negated, de-scaled motion.
    """
    picked = []
    for r in records:
        if r.frame_index != frame_index or r.source != -1 or r.d_ref > d_ref_max:
            continue
        picked.append(BlockVector(
            x0=r.dst_x, y0=r.dst_y, w=r.block_w, h=r.block_h,
            dx=-r.motion_x / r.motion_scale,
            dy=-r.motion_y / r.motion_scale))
    return picked


def frames_with_vectors(records: Iterable[MVRecord], d_ref_max: int = 1) -> set[int]:
    """Frame indices that carry at least one usable past-reference vector."""
    return {r.frame_index for r in records
            if r.source == -1 and r.d_ref <= d_ref_max}
