"""Synthetic data with analytic ground truth, and brute-force oracles.

Patterns are continuous, band-limited functions of the plane, so a
triplet's middle frame can be sampled exactly at the half-displacement
instead of being warped from the endpoints.  Block vectors derived from
the ground-truth flow can be corrupted with Gaussian noise and uniform
outliers to mimic codec estimation error.

The oracle_* functions are deliberately naive scalar loops.  They define
the reference semantics of the fast kernels and must stay unoptimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_types import FlowField, Image, float_to_u8
from .errors import InvalidInput
from .mv_ingest import MVRecord

PATTERNS = ("checkerboard", "smooth-noise", "texture-ramp")


@dataclass(frozen=True)
class SynthSpec:
    pattern: str = "smooth-noise"
    velocity: tuple[float, float] = (3.0, 1.0)
    size: tuple[int, int] = (128, 128)   # (width, height), multiples of 16
    mv_block: int = 16
    mv_noise_sigma: float = 0.0          # pixels
    mv_outlier_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise InvalidInput(f"unknown pattern {self.pattern!r}")
        w, h = self.size
        if w % 16 or h % 16 or w <= 0 or h <= 0:
            raise InvalidInput(f"size must be positive multiples of 16, got {self.size}")
        vx, vy = self.velocity
        if math.hypot(vx, vy) > 16.0:
            raise InvalidInput(f"|velocity| must be <= 16, got {self.velocity}")
        if not (0.0 <= self.mv_outlier_rate <= 1.0):
            raise InvalidInput("mv_outlier_rate must be in [0, 1]")


class _Pattern:
    """A translatable continuous field p(x, y) -> [0, 1]."""

    def __init__(self, spec: SynthSpec):
        rng = np.random.default_rng(spec.seed)
        self.kind = spec.pattern
        if self.kind == "checkerboard":
            # smooth checker, period 8, random phase
            self.phase = rng.uniform(0.0, 2.0 * math.pi, size=2)
        elif self.kind == "smooth-noise":
            # sum of plane waves, wavenumber capped well below Nyquist
            k = 40
            ang = rng.uniform(0.0, 2.0 * math.pi, size=k)
            mag = rng.uniform(0.03, 0.30, size=k)
            self.kx = mag * np.cos(ang)
            self.ky = mag * np.sin(ang)
            self.amp = rng.standard_normal(k) / math.sqrt(k)
            self.phi = rng.uniform(0.0, 2.0 * math.pi, size=k)
            self.sigma = math.sqrt(float(np.sum(self.amp ** 2)) / 2.0)
        else:  # texture-ramp
            w, h = spec.size
            self.slope = 0.55 / (w + 2.0 * h + 96.0)
            ang = rng.uniform(0.0, 2.0 * math.pi, size=3)
            mag = rng.uniform(0.05, 0.25, size=3)
            self.kx = mag * np.cos(ang)
            self.ky = mag * np.sin(ang)
            self.phi = rng.uniform(0.0, 2.0 * math.pi, size=3)

    def eval(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.kind == "checkerboard":
            w = 2.0 * math.pi / 8.0
            return 0.5 + 0.5 * np.sin(w * xs + self.phase[0]) * np.sin(w * ys + self.phase[1])
        if self.kind == "smooth-noise":
            f = np.zeros_like(xs)
            for i in range(len(self.amp)):
                f += self.amp[i] * np.cos(self.kx[i] * xs + self.ky[i] * ys + self.phi[i])
            return 0.5 + 0.5 * np.tanh(f / (2.0 * self.sigma))
        f = 0.2 + self.slope * (xs + 2.0 * ys + 48.0)
        for i in range(3):
            f = f + 0.04 * np.cos(self.kx[i] * xs + self.ky[i] * ys + self.phi[i])
        return f


@dataclass(frozen=True)
class Triplet:
    i0: Image
    it_gt: Image
    i1: Image
    gt_flow: FlowField


def gen_triplet(spec: SynthSpec) -> Triplet:
    """Three frames of a pattern translating at constant velocity.

    The ground-truth middle frame is sampled analytically at the exact
    half displacement; it is not a warp of either endpoint.
    """
    w, h = spec.size
    pat = _Pattern(spec)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    vx, vy = spec.velocity

    def frame(shift: float) -> Image:
        p = pat.eval(xs - vx * shift, ys - vy * shift)
        gray = float_to_u8(p)
        return Image.from_array(np.repeat(gray[:, :, None], 3, axis=2))

    flow = FlowField.from_arrays(np.full((h, w), float(vx)),
                                 np.full((h, w), float(vy)))
    return Triplet(i0=frame(0.0), it_gt=frame(0.5), i1=frame(1.0), gt_flow=flow)


def gen_sequence(spec: SynthSpec, count: int) -> tuple[list[Image], list[Image]]:
    """count frames of uniform translation plus the analytic midframes.

    Returns (frames, mids); mids[i] is the ground truth halfway between
    frames[i] and frames[i + 1].
    """
    if count < 2:
        raise InvalidInput("need at least 2 frames")
    w, h = spec.size
    pat = _Pattern(spec)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    vx, vy = spec.velocity

    def frame(shift: float) -> Image:
        p = pat.eval(xs - vx * shift, ys - vy * shift)
        gray = float_to_u8(p)
        return Image.from_array(np.repeat(gray[:, :, None], 3, axis=2))

    frames = [frame(float(i)) for i in range(count)]
    mids = [frame(i + 0.5) for i in range(count - 1)]
    return frames, mids


def gen_block_mvs(gt_flow: FlowField, spec: SynthSpec,
                  frame_index: int = 1) -> list[MVRecord]:
    """Codec-style block vectors for the ground-truth flow.

    Per block, the stored motion is the negated flow at the block center
    plus Gaussian noise (mv_noise_sigma, pixels), plus, with probability
    mv_outlier_rate, a uniform outlier in [-16, 16]^2; the total is then
    rounded to quarter-pel.
    """
    rng = np.random.default_rng(spec.seed + 0x5EED)
    blk = spec.mv_block
    records = []
    for y0 in range(0, gt_flow.height, blk):
        for x0 in range(0, gt_flow.width, blk):
            cx = min(x0 + blk // 2, gt_flow.width - 1)
            cy = min(y0 + blk // 2, gt_flow.height - 1)
            mx = -gt_flow.u[cy, cx]
            my = -gt_flow.v[cy, cx]
            if spec.mv_noise_sigma > 0.0:
                mx += rng.normal(0.0, spec.mv_noise_sigma)
                my += rng.normal(0.0, spec.mv_noise_sigma)
            if spec.mv_outlier_rate > 0.0 and rng.random() < spec.mv_outlier_rate:
                mx += rng.uniform(-16.0, 16.0)
                my += rng.uniform(-16.0, 16.0)
            qx = int(np.rint(mx * 4.0))
            qy = int(np.rint(my * 4.0))
            records.append(MVRecord(
                frame_index=frame_index, source=-1,
                block_w=blk, block_h=blk,
                src_x=x0 + int(np.rint(qx / 4.0)),
                src_y=y0 + int(np.rint(qy / 4.0)),
                dst_x=x0, dst_y=y0,
                motion_x=qx, motion_y=qy, motion_scale=4, d_ref=1))
    return records


# ---------------------------------------------------------------------------
# scalar-loop oracles


def oracle_conv2d(x, w, b, stride=1, pad=0):
    """Direct convolution, zero padding, quadruple loop."""
    n, cin, h, wid = x.shape
    cout, cin2, kh, kw = w.shape
    assert cin == cin2
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wid + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, oh, ow))
    for ni in range(n):
        for oc in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    acc = float(b[oc])
                    for ic in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                iy = oy * stride + ky - pad
                                ix = ox * stride + kx - pad
                                if 0 <= iy < h and 0 <= ix < wid:
                                    acc += float(x[ni, ic, iy, ix]) * float(w[oc, ic, ky, kx])
                    out[ni, oc, oy, ox] = acc
    return out


def oracle_conv_transpose2d(x, w, b, stride=2, pad=0):
    """Direct transposed convolution: scatter each input by the kernel."""
    n, cin, h, wid = x.shape
    cout, cin2, kh, kw = w.shape
    assert cin == cin2
    oh = (h - 1) * stride + kh - 2 * pad
    ow = (wid - 1) * stride + kw - 2 * pad
    out = np.zeros((n, cout, oh, ow))
    for ni in range(n):
        for oc in range(cout):
            out[ni, oc, :, :] = float(b[oc])
    for ni in range(n):
        for ic in range(cin):
            for iy in range(h):
                for ix in range(wid):
                    v = float(x[ni, ic, iy, ix])
                    for oc in range(cout):
                        for ky in range(kh):
                            for kx in range(kw):
                                oy = iy * stride + ky - pad
                                ox = ix * stride + kx - pad
                                if 0 <= oy < oh and 0 <= ox < ow:
                                    out[ni, oc, oy, ox] += v * float(w[oc, ic, ky, kx])
    return out


def oracle_conv2d_int8(xq, wq, bias, s_x, s_w, s_out, stride=1, pad=0):
    """Integer convolution with exact accumulation and shared requantization.

    Zero padding, round-half-to-even on (accum * s_x * s_w) / s_out,
    clamp to [-128, 127].
    """
    n, cin, h, wid = xq.shape
    cout, cin2, kh, kw = wq.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wid + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, oh, ow), dtype=np.int8)
    sw = s_x * s_w
    for ni in range(n):
        for oc in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    acc = int(bias[oc])
                    for ic in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                iy = oy * stride + ky - pad
                                ix = ox * stride + kx - pad
                                if 0 <= iy < h and 0 <= ix < wid:
                                    acc += int(xq[ni, ic, iy, ix]) * int(wq[oc, ic, ky, kx])
                    scaled = (float(acc) * sw) / s_out
                    q = float(np.rint(scaled))
                    out[ni, oc, oy, ox] = np.int8(min(127.0, max(-128.0, q)))
    return out


def oracle_median(comp, k):
    """k x k median per pixel, replicate border, explicit sort."""
    h, w = comp.shape
    r = k // 2
    out = np.zeros_like(comp)
    for y in range(h):
        for x in range(w):
            vals = []
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    vals.append(float(comp[yy, xx]))
            vals.sort()
            out[y, x] = vals[(k * k - 1) // 2]
    return out


def oracle_gaussian(comp, taps):
    """Full 2-D Gaussian (outer product of taps), replicate border."""
    h, w = comp.shape
    r = (len(taps) - 1) // 2
    out = np.zeros_like(comp)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    acc += float(taps[dy + r]) * float(taps[dx + r]) * float(comp[yy, xx])
            out[y, x] = acc
    return out


def oracle_warp(data, u, v, scale):
    """Per-pixel bilinear warp with edge clamping; (H, W, C) data."""
    h, w, c = data.shape
    out = np.zeros_like(data)
    for y in range(h):
        for x in range(w):
            cx = min(max(x + scale * float(u[y, x]), 0.0), w - 1.0)
            cy = min(max(y + scale * float(v[y, x]), 0.0), h - 1.0)
            x0 = int(math.floor(cx))
            y0 = int(math.floor(cy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = cx - x0
            fy = cy - y0
            for ch in range(c):
                top = data[y0, x0, ch] * (1.0 - fx) + data[y0, x1, ch] * fx
                bot = data[y1, x0, ch] * (1.0 - fx) + data[y1, x1, ch] * fx
                out[y, x, ch] = top * (1.0 - fy) + bot * fy
    return out


def oracle_percentile(values, q):
    """Percentile with linear interpolation between order statistics."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise InvalidInput("empty value list")
    pos = (len(vals) - 1) * (q / 100.0)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(vals) - 1)
    frac = pos - lo
    return vals[lo] * (1.0 - frac) + vals[hi] * frac
