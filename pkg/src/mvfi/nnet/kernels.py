"""Numeric kernels for the operator vocabulary.

Float activations are float64; stored weights are float32 and upcast on
use.  The int8 kernel accumulates exactly in int64 (the deployable width
is int32; desk-scale operands stay far inside it) and requantizes with
round-half-to-even on (accum * s_x * s_w) / s_out, the same expression
the float fake-quantization path evaluates, so the two agree bit-exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInput


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray,
           stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlation with zero padding, NCHW in, NCHW out."""
    kh, kw = w.shape[2], w.shape[3]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    views = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    if stride > 1:
        views = views[:, :, ::stride, ::stride]
    out = np.einsum("nchwab,ocab->nohw", views, w.astype(np.float64),
                    optimize=True)
    return out + b.astype(np.float64)[None, :, None, None]


def conv_transpose2d(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                     stride: int = 2, pad: int = 0) -> np.ndarray:
    """Transposed convolution: scatter each input pixel by the kernel.

    Output dims are (in - 1) * stride + k - 2 * pad.  Weight layout
    matches conv2d: (out_ch, in_ch, kh, kw).
    """
    n, cin, h, wid = x.shape
    cout, cin2, kh, kw = w.shape
    if cin != cin2:
        raise InvalidInput(f"channel mismatch {cin} vs {cin2}")
    oh = (h - 1) * stride + kh - 2 * pad
    ow = (wid - 1) * stride + kw - 2 * pad
    if oh <= 0 or ow <= 0:
        raise InvalidInput("empty transposed-conv output")
    out = np.zeros((n, cout, oh, ow))
    out += b.astype(np.float64)[None, :, None, None]
    wf = w.astype(np.float64)
    for ky in range(kh):
        # input rows iy with 0 <= iy*stride + ky - pad < oh
        i_lo = max(0, (pad - ky + stride - 1) // stride)
        i_hi = min(h - 1, (oh - 1 - ky + pad) // stride)
        if i_lo > i_hi:
            continue
        for kx in range(kw):
            j_lo = max(0, (pad - kx + stride - 1) // stride)
            j_hi = min(wid - 1, (ow - 1 - kx + pad) // stride)
            if j_lo > j_hi:
                continue
            contrib = np.einsum("nchw,oc->nohw",
                                x[:, :, i_lo:i_hi + 1, j_lo:j_hi + 1],
                                wf[:, :, ky, kx], optimize=True)
            oy0 = i_lo * stride + ky - pad
            ox0 = j_lo * stride + kx - pad
            out[:, :,
                oy0:oy0 + (i_hi - i_lo) * stride + 1:stride,
                ox0:ox0 + (j_hi - j_lo) * stride + 1:stride] += contrib
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise InvalidInput(f"add shape mismatch {a.shape} vs {b.shape}")
    return a + b


def batchnorm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
              mean: np.ndarray, var: np.ndarray, eps: float) -> np.ndarray:
    """Inference-mode normalization, same algebra the fused form uses."""
    scale = gamma.astype(np.float64) / np.sqrt(var.astype(np.float64) + eps)
    shift = beta.astype(np.float64) - mean.astype(np.float64) * scale
    return x * scale[None, :, None, None] + shift[None, :, None, None]


# ---------------------------------------------------------------------------
# int8 path


def quantize_weight_int8(w: np.ndarray, scale) -> np.ndarray:
    """Symmetric weight quantization, clamp to [-127, 127]."""
    q = np.rint(np.asarray(w, dtype=np.float64) / scale)
    return np.clip(q, -127, 127).astype(np.int8)


def quantize_bias_int32(b: np.ndarray, s_x: float, s_w: float) -> np.ndarray:
    q = np.rint(np.asarray(b, dtype=np.float64) / (s_x * s_w))
    return q.astype(np.int32)


def conv2d_int8(xq: np.ndarray, s_x: float, wq: np.ndarray, s_w: float,
                bias: np.ndarray, s_out: float,
                stride: int = 1, pad: int = 0) -> np.ndarray:
    """int8 convolution with exact integer accumulation.

    xq int8, wq int8, bias int32; zero-points are all zero.  Returns int8.
    """
    if xq.dtype != np.int8 or wq.dtype != np.int8 or bias.dtype != np.int32:
        raise InvalidInput("conv2d_int8 expects int8 tensors and int32 bias")
    if s_x <= 0 or s_w <= 0 or s_out <= 0:
        raise InvalidInput("quantization scales must be positive")
    kh, kw = wq.shape[2], wq.shape[3]
    x64 = xq.astype(np.int64)
    if pad:
        x64 = np.pad(x64, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    views = np.lib.stride_tricks.sliding_window_view(x64, (kh, kw), axis=(2, 3))
    if stride > 1:
        views = views[:, :, ::stride, ::stride]
    acc = np.einsum("nchwab,ocab->nohw", views, wq.astype(np.int64))
    acc = acc + bias.astype(np.int64)[None, :, None, None]
    scaled = (acc.astype(np.float64) * (s_x * s_w)) / s_out
    q = np.clip(np.rint(scaled), -128, 127)
    return q.astype(np.int8)


def dequantize_int8(q: np.ndarray, scale: float) -> np.ndarray:
    return q.astype(np.float64) * scale
