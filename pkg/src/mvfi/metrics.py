"""Fidelity metrics: PSNR, SSIM, cosine similarity."""

from __future__ import annotations

import math

import numpy as np

from .core_types import Image
from .errors import InvalidInput

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB over all samples, peak 255.

    Identical inputs return +inf.
    """
    if a.data.shape != b.data.shape:
        raise InvalidInput(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    if a.is_float or b.is_float:
        raise InvalidInput("psnr expects 8-bit samples")
    da = a.data.astype(np.float64)
    db = b.data.astype(np.float64)
    mse = np.mean((da - db) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _ssim_window() -> np.ndarray:
    r = SSIM_WINDOW // 2
    i = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(i * i) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    w = np.outer(g, g)
    return w / w.sum()


def _windowed_mean(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    # valid windows only: no padding anywhere
    k = w.shape[0]
    views = np.lib.stride_tricks.sliding_window_view(x, (k, k))
    return np.einsum("ijab,ab->ij", views, w)


def ssim(a: Image, b: Image) -> float:
    """Mean structural similarity over valid window positions.

    11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255.
    Channels are scored independently and averaged.
    """
    if a.data.shape != b.data.shape:
        raise InvalidInput(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    if min(a.width, a.height) < SSIM_WINDOW:
        raise InvalidInput(
            f"both dims must be >= {SSIM_WINDOW}, got {a.width}x{a.height}")
    if a.is_float or b.is_float:
        raise InvalidInput("ssim expects 8-bit samples")
    w = _ssim_window()
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    scores = []
    for ch in range(a.channels):
        x = a.data[:, :, ch].astype(np.float64)
        y = b.data[:, :, ch].astype(np.float64)
        mx = _windowed_mean(x, w)
        my = _windowed_mean(y, w)
        mxx = _windowed_mean(x * x, w)
        myy = _windowed_mean(y * y, w)
        mxy = _windowed_mean(x * y, w)
        vx = mxx - mx * mx
        vy = myy - my * my
        cov = mxy - mx * my
        num = (2.0 * mx * my + c1) * (2.0 * cov + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def cos_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two flattened tensors.

    Two zero vectors are identical (1.0); one zero vector is orthogonal
    to anything (0.0).
    """
    fa = np.asarray(a, dtype=np.float64).ravel()
    fb = np.asarray(b, dtype=np.float64).ravel()
    if fa.shape != fb.shape:
        raise InvalidInput(f"shape mismatch {fa.shape} vs {fb.shape}")
    na = np.linalg.norm(fa)
    nb = np.linalg.norm(fb)
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(fa, fb) / (na * nb))
