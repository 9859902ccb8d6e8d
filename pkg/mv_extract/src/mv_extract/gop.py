"""Decode-order reference distances.

Motion-vector side data does not name the reference frame, so d_ref is
derived from GOP structure: the past reference of an inter frame is the
nearest preceding reference frame in display order, the future reference
the nearest following one, and the distance is measured in decode order.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ExtractError

PICT_TYPES = ("I", "P", "B")


@dataclass(frozen=True)
class FrameInfo:
    pict_type: str
    is_reference: bool = True

    def __post_init__(self):
        if self.pict_type not in PICT_TYPES:
            raise ExtractError(f"unknown picture type {self.pict_type!r}")


def decode_positions(frames: list[FrameInfo]) -> list[int]:
    """Decode-order position of each display-order frame.

    Reference frames keep their display order; each non-reference B frame
    is decoded after the reference that closes its display gap.
    """
    pos = [-1] * len(frames)
    counter = 0
    pending: list[int] = []
    for i, f in enumerate(frames):
        if f.is_reference:
            pos[i] = counter
            counter += 1
            for j in pending:
                pos[j] = counter
                counter += 1
            pending = []
        else:
            pending.append(i)
    for j in pending:
        pos[j] = counter
        counter += 1
    return pos


def ref_distance(frames: list[FrameInfo], display_index: int, source: int) -> int:
    """Decode-order distance from a frame to its inferred reference."""
    if not 0 <= display_index < len(frames):
        raise ExtractError(f"display index {display_index} out of range")
    if source not in (-1, 1):
        raise ExtractError(f"source must be -1 or +1, got {source}")
    step = -1 if source == -1 else 1
    j = display_index + step
    while 0 <= j < len(frames):
        if frames[j].is_reference:
            break
        j += step
    else:
        side = "past" if source == -1 else "future"
        raise ExtractError(
            f"frame {display_index} has no {side} reference frame")
    pos = decode_positions(frames)
    d = pos[display_index] - pos[j]
    if d < 1:
        raise ExtractError(
            f"reference of frame {display_index} decodes later (gop order broken)")
    return d
