"""Block-vector densification, flow smoothing, and motion-compensated blending.

The production pipeline turns sparse block vectors into a midpoint blend:

  1. zero-order-hold densification to a dense per-pixel field
  2. 4x nearest-neighbor downsample
  3. 5x5 per-component median filter
  4. Gaussian blur, sigma 2.0
  5. bilinear upsample back to full resolution
  6. warp the earlier frame by +flow/2 and the later frame by -flow/2,
     average the two warps

Every filter uses replicate (clamp-to-edge) padding.  Flow values are
full-resolution pixel displacements throughout; resampling never rescales
them.  All stages are single-threaded and deterministic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core_types import FlowField, Image
from .errors import InvalidInput
from .mv_ingest import BlockVector


class SmoothingProfile(enum.Enum):
    ZOH_ONLY = "zoh"          # densify only, no smoothing
    V1_LEGACY = "v1"          # 5x5 box filter + 16x16 tile average
    OBMC_COSINE = "obmc"      # overlapped blocks, raised-cosine window
    PRODUCTION = "production" # down/median/gauss/up chain


def zoh_densify(vectors: list[BlockVector], width: int, height: int) -> FlowField:
    """Paint block displacements into a dense field, last write wins.

    Pixels no vector covers keep zero flow (intra or uncovered regions).
    """
    u = np.zeros((height, width))
    v = np.zeros((height, width))
    for b in vectors:
        x0 = max(b.x0, 0)
        y0 = max(b.y0, 0)
        x1 = min(b.x0 + b.w, width)
        y1 = min(b.y0 + b.h, height)
        if x1 <= x0 or y1 <= y0:
            continue
        u[y0:y1, x0:x1] = b.dx
        v[y0:y1, x0:x1] = b.dy
    return FlowField.from_arrays(u, v)


def downsample_flow_nearest(flow: FlowField, factor: int) -> FlowField:
    """Keep the top-left sample of each factor x factor cell.

    Output dims are ceil(dim / factor); values are untouched.
    """
    if factor < 1:
        raise InvalidInput(f"factor must be >= 1, got {factor}")
    return FlowField.from_arrays(flow.u[::factor, ::factor],
                                 flow.v[::factor, ::factor])


def _median_2d(comp: np.ndarray, k: int) -> np.ndarray:
    r = k // 2
    padded = np.pad(comp, r, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    # median of k*k values = element (k*k - 1) / 2 of the sorted window
    return np.median(windows, axis=(2, 3))


def median_filter_flow(flow: FlowField, k: int = 5) -> FlowField:
    """k x k median, applied to u and v independently."""
    if k < 1 or k % 2 == 0:
        raise InvalidInput(f"kernel size must be odd and positive, got {k}")
    return FlowField.from_arrays(_median_2d(flow.u, k), _median_2d(flow.v, k))


def gaussian_taps(sigma: float) -> np.ndarray:
    """Normalized taps exp(-i^2 / (2 sigma^2)) for i in [-r, r], r = ceil(3 sigma)."""
    r = math.ceil(3.0 * sigma)
    i = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def _blur_axis(comp: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = (len(taps) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(comp, pad, mode="edge")
    out = np.zeros_like(comp)
    for i, t in enumerate(taps):
        if axis == 0:
            out += t * padded[i:i + comp.shape[0], :]
        else:
            out += t * padded[:, i:i + comp.shape[1]]
    return out


def gaussian_blur_flow(flow: FlowField, sigma: float = 2.0) -> FlowField:
    """Separable Gaussian blur (horizontal then vertical), replicate border."""
    if sigma <= 0:
        raise InvalidInput(f"sigma must be positive, got {sigma}")
    taps = gaussian_taps(sigma)
    u = _blur_axis(_blur_axis(flow.u, taps, 1), taps, 0)
    v = _blur_axis(_blur_axis(flow.v, taps, 1), taps, 0)
    return FlowField.from_arrays(u, v)


def _bilinear_axis_coords(out_len: int, in_len: int):
    """Half-pixel-center source coordinates for 1-D bilinear resampling."""
    x = (np.arange(out_len, dtype=np.float64) + 0.5) * in_len / out_len - 0.5
    x = np.clip(x, 0.0, in_len - 1.0)
    x0 = np.floor(x).astype(np.int64)
    x1 = np.minimum(x0 + 1, in_len - 1)
    return x0, x1, x - x0


def _bilinear_resize_2d(comp: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = comp.shape
    y0, y1, fy = _bilinear_axis_coords(out_h, in_h)
    x0, x1, fx = _bilinear_axis_coords(out_w, in_w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = comp[np.ix_(y0, x0)] * (1.0 - fx) + comp[np.ix_(y0, x1)] * fx
    bot = comp[np.ix_(y1, x0)] * (1.0 - fx) + comp[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def upsample_flow_bilinear(flow: FlowField, out_w: int, out_h: int) -> FlowField:
    """Bilinear resize with the half-pixel-center convention.

    src = (dst + 0.5) * in / out - 0.5, clamped to the valid range.
    Displacement values are not rescaled.
    """
    return FlowField.from_arrays(_bilinear_resize_2d(flow.u, out_h, out_w),
                                 _bilinear_resize_2d(flow.v, out_h, out_w))


def box_filter_flow(flow: FlowField, k: int = 5) -> FlowField:
    """k x k mean filter per component, replicate border (legacy pipeline)."""
    if k < 1 or k % 2 == 0:
        raise InvalidInput(f"kernel size must be odd and positive, got {k}")
    r = k // 2

    def mean2d(comp):
        padded = np.pad(comp, r, mode="edge")
        out = np.zeros_like(comp)
        for dy in range(k):
            for dx in range(k):
                out += padded[dy:dy + comp.shape[0], dx:dx + comp.shape[1]]
        return out / (k * k)

    return FlowField.from_arrays(mean2d(flow.u), mean2d(flow.v))


def tile_average_flow(flow: FlowField, tile: int = 16) -> FlowField:
    """Replace each non-overlapping tile with its mean (legacy pipeline)."""
    u = flow.u.copy()
    v = flow.v.copy()
    for y in range(0, flow.height, tile):
        for x in range(0, flow.width, tile):
            sl = np.s_[y:y + tile, x:x + tile]
            u[sl] = flow.u[sl].mean()
            v[sl] = flow.v[sl].mean()
    return FlowField.from_arrays(u, v)


def _sample_bilinear(data: np.ndarray, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) data at float coords, clamping to the edges."""
    h, w = data.shape[:2]
    cx = np.clip(cx, 0.0, w - 1.0)
    cy = np.clip(cy, 0.0, h - 1.0)
    x0 = np.floor(cx).astype(np.int64)
    y0 = np.floor(cy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (cx - x0)[..., None]
    fy = (cy - y0)[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def warp_bilinear(img: Image, flow: FlowField, scale: float = 1.0) -> Image:
    """Sample img at (x + scale*u, y + scale*v); zero flow is the identity."""
    imgf = img.to_float()
    if (flow.width, flow.height) != (img.width, img.height):
        raise InvalidInput("flow dims do not match image dims")
    ys, xs = np.mgrid[0:img.height, 0:img.width].astype(np.float64)
    out = _sample_bilinear(imgf.data, xs + scale * flow.u, ys + scale * flow.v)
    return Image.from_array(out)


def obmc_warp(img: Image, vectors: list[BlockVector], scale: float = 1.0) -> Image:
    """Overlapped-block warp with a separable raised-cosine window.

    Each block contributes over a 2w x 2h support centered on it; the
    window peaks at 1 on the block center and falls to 0 at the support
    edge.  On a uniform grid the shifted windows sum to one.  Pixels with
    zero total weight fall back to the unwarped source.
    """
    imgf = img.to_float()
    h, w = img.height, img.width
    acc = np.zeros((h, w, imgf.data.shape[2]))
    wsum = np.zeros((h, w))
    ys_full, xs_full = np.mgrid[0:h, 0:w].astype(np.float64)
    for b in vectors:
        cx = b.x0 + b.w / 2.0
        cy = b.y0 + b.h / 2.0
        # pixels whose center lies strictly inside the 2w x 2h support
        x_lo = max(int(math.floor(cx - b.w + 0.5)), 0)
        x_hi = min(int(math.ceil(cx + b.w - 0.5)), w)
        y_lo = max(int(math.floor(cy - b.h + 0.5)), 0)
        y_hi = min(int(math.ceil(cy + b.h - 0.5)), h)
        if x_lo >= x_hi or y_lo >= y_hi:
            continue
        px = np.arange(x_lo, x_hi, dtype=np.float64) + 0.5 - cx
        py = np.arange(y_lo, y_hi, dtype=np.float64) + 0.5 - cy
        wx = 0.5 * (1.0 + np.cos(math.pi * px / b.w))
        wy = 0.5 * (1.0 + np.cos(math.pi * py / b.h))
        wx[np.abs(px) >= b.w] = 0.0
        wy[np.abs(py) >= b.h] = 0.0
        wt = wy[:, None] * wx[None, :]
        region = np.s_[y_lo:y_hi, x_lo:x_hi]
        sample = _sample_bilinear(imgf.data,
                                  xs_full[region] + scale * b.dx,
                                  ys_full[region] + scale * b.dy)
        acc[region] += wt[:, :, None] * sample
        wsum[region] += wt
    covered = wsum > 0.0
    out = imgf.data.copy()
    out[covered] = acc[covered] / wsum[covered][:, None]
    return Image.from_array(out)


@dataclass(frozen=True)
class PrealignResult:
    w0: Image        # earlier frame warped to the midpoint (float)
    w1: Image        # later frame warped to the midpoint (float)
    blend: Image     # (w0 + w1) / 2 (float)
    flow: FlowField  # the dense field used for warping


def smooth_flow(zoh: FlowField, profile: SmoothingProfile,
                down_factor: int = 4, median_k: int = 5,
                sigma: float = 2.0) -> FlowField:
    """Apply the profile's smoothing chain to a densified field."""
    if down_factor not in (1, 2, 4, 8):
        raise InvalidInput(f"down_factor must be in {{1,2,4,8}}, got {down_factor}")
    if median_k < 3 or median_k % 2 == 0:
        raise InvalidInput(f"median_k must be odd and >= 3, got {median_k}")
    if sigma <= 0:
        raise InvalidInput(f"sigma must be positive, got {sigma}")
    if profile in (SmoothingProfile.ZOH_ONLY, SmoothingProfile.OBMC_COSINE):
        return zoh
    if profile is SmoothingProfile.V1_LEGACY:
        return tile_average_flow(box_filter_flow(zoh, 5), 16)
    small = downsample_flow_nearest(zoh, down_factor)
    small = median_filter_flow(small, median_k)
    small = gaussian_blur_flow(small, sigma)
    return upsample_flow_bilinear(small, zoh.width, zoh.height)


def prealign_pair(img0: Image, img1: Image, vectors: list[BlockVector],
                  profile: SmoothingProfile = SmoothingProfile.PRODUCTION,
                  ) -> PrealignResult:
    """Warp both frames halfway along the flow and average them.

    The flow is forward (frame 0 to frame 1), so the earlier frame's
    content moves ahead by flow/2 (backward sampling at -flow/2) and the
    later frame's content moves back (sampling at +flow/2).  With no
    vectors the flow is zero and the blend degrades to the plain frame
    average.
    """
    if (img0.width, img0.height) != (img1.width, img1.height):
        raise InvalidInput("frame dims do not match")
    i0 = img0.to_float()
    i1 = img1.to_float()
    zoh = zoh_densify(vectors, img0.width, img0.height)
    if profile is SmoothingProfile.OBMC_COSINE:
        w0 = obmc_warp(i0, vectors, -0.5)
        w1 = obmc_warp(i1, vectors, 0.5)
        flow = zoh
    else:
        flow = smooth_flow(zoh, profile)
        w0 = warp_bilinear(i0, flow, -0.5)
        w1 = warp_bilinear(i1, flow, 0.5)
    blend = Image.from_array((w0.data + w1.data) / 2.0)
    return PrealignResult(w0=w0, w1=w1, blend=blend, flow=flow)
