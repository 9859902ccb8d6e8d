"""Value types for pictures, dense flow fields, and NCHW tensors.

All types validate on construction and treat their payload as immutable:
operations return new instances, never mutate in place.

Rounding rule for every float-to-8-bit pixel write in the package: round
half away from zero (0.5/255 -> 128). Quantization code uses a different
rule (half to even); the two must never be mixed up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput


def float_to_u8(values: np.ndarray) -> np.ndarray:
    """Map floats in [0, 1] to uint8 with round-half-away-from-zero."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    # values are non-negative after the clamp, so floor(x + 0.5) is
    # exactly round-half-away-from-zero
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class Image:
    """A picture: uint8 samples or a float variant clamped to [0, 1].

    data is row-major interleaved, shape (height, width, channels).
    """

    width: int
    height: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.data
        if self.channels not in (1, 3):
            raise InvalidInput(f"channels must be 1 or 3, got {self.channels}")
        if d.shape != (self.height, self.width, self.channels):
            raise InvalidInput(
                f"data shape {d.shape} != ({self.height}, {self.width}, {self.channels})")
        if d.dtype == np.uint8:
            pass
        elif np.issubdtype(d.dtype, np.floating):
            clamped = np.clip(d.astype(np.float64), 0.0, 1.0)
            object.__setattr__(self, "data", clamped)
        else:
            raise InvalidInput(f"unsupported sample dtype {d.dtype}")
        self.data.setflags(write=False)

    @property
    def is_float(self) -> bool:
        return self.data.dtype != np.uint8

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise InvalidInput(f"expected (H, W) or (H, W, C) samples, got {arr.shape}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)

    def to_float(self) -> "Image":
        """8-bit samples to floats in [0, 1] (divide by 255)."""
        if self.is_float:
            return self
        return Image.from_array(self.data.astype(np.float64) / 255.0)

    def to_u8(self) -> "Image":
        """Float samples to uint8 via the package-wide pixel rounding rule."""
        if not self.is_float:
            return self
        return Image.from_array(float_to_u8(self.data))


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement in pixels, components u (x) and v (y)."""

    width: int
    height: int
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name, comp in (("u", self.u), ("v", self.v)):
            if comp.shape != (self.height, self.width):
                raise InvalidInput(
                    f"{name} shape {comp.shape} != ({self.height}, {self.width})")
            if not np.isfinite(comp).all():
                raise InvalidInput(f"{name} contains non-finite values")
        object.__setattr__(self, "u", self.u.astype(np.float64))
        object.__setattr__(self, "v", self.v.astype(np.float64))
        self.u.setflags(write=False)
        self.v.setflags(write=False)

    @classmethod
    def from_arrays(cls, u: np.ndarray, v: np.ndarray) -> "FlowField":
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        h, w = u.shape
        return cls(width=w, height=h, u=u, v=v)


@dataclass(frozen=True)
class Tensor:
    """A float tensor in NCHW layout."""

    shape: tuple[int, int, int, int]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.shape) != 4:
            raise InvalidInput(f"shape must be NCHW, got {self.shape}")
        if self.data.shape != tuple(self.shape):
            raise InvalidInput(f"data shape {self.data.shape} != {self.shape}")
        if not np.isfinite(self.data).all():
            raise InvalidInput("tensor contains non-finite values")
        object.__setattr__(self, "data", self.data.astype(np.float64))
        object.__setattr__(self, "shape", tuple(self.shape))
        self.data.setflags(write=False)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Tensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(shape=arr.shape, data=arr)


def image_to_tensor(img: Image) -> Tensor:
    """3-channel 8-bit picture to a (1, 3, H, W) tensor with samples / 255."""
    if img.channels != 3:
        raise InvalidInput(f"expected 3 channels, got {img.channels}")
    if img.is_float:
        raise InvalidInput("expected 8-bit samples, got float")
    chw = img.data.astype(np.float64).transpose(2, 0, 1) / 255.0
    return Tensor.from_array(chw[None])


def tensor_to_image(t: Tensor) -> Image:
    """(1, 3, H, W) tensor to an 8-bit picture; clamps then rounds."""
    n, c, h, w = t.shape
    if n != 1 or c != 3:
        raise InvalidInput(f"expected shape (1, 3, H, W), got {t.shape}")
    hwc = t.data[0].transpose(1, 2, 0)
    return Image.from_array(float_to_u8(hwc))
