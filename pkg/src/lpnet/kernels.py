"""Dense-grid numerics shared by all layers.

Everything operates on float64 numpy arrays. Spatial operators accept
arrays of shape (..., H, W) and act on the last two axes, so the same
code serves single maps and channel stacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def default_sigma(size: int) -> float:
    """Bandwidth that makes the window effectively span the kernel."""
    return max((size - 1) / 4.0, 0.25)


@dataclass(frozen=True)
class GaussianKernel:
    """Normalized 2-D Gaussian window.

    Weights are strictly positive, flip-symmetric and sum to 1.
    """

    size: int
    sigma: float
    weights: np.ndarray = field(repr=False)


def gaussian_kernel(size: int, sigma: float | None = None) -> GaussianKernel:
    """Build a size x size Gaussian window centered at (size-1)/2.

    weights[x, y] is proportional to exp(-((x-c)^2 + (y-c)^2) / (2*sigma^2))
    and the window is normalized to sum exactly 1.
    """
    if size < 1:
        raise ValueError(f"kernel size must be >= 1, got {size}")
    if sigma is None:
        sigma = default_sigma(size)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    c = (size - 1) / 2.0
    ax = np.arange(size, dtype=np.float64)
    d2 = (ax[:, None] - c) ** 2 + (ax[None, :] - c) ** 2
    w = np.exp(-d2 / (2.0 * sigma * sigma))
    w /= w.sum()
    # Large size/small sigma can underflow far corners to exact zero; floor
    # at the smallest normal float so weights stay strictly positive (the
    # perturbation to the sum is ~1e-306, far inside the 1e-12 budget).
    w = np.maximum(w, np.finfo(np.float64).tiny)
    return GaussianKernel(size=size, sigma=float(sigma), weights=w)


def sliding_windows(x: np.ndarray, kh: int, kw: int,
                    stride: tuple[int, int] = (1, 1)) -> np.ndarray:
    """Strided view of all kh x kw patches: (..., H', W', kh, kw)."""
    sh, sw = stride
    if sh < 1 or sw < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    wins = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(-2, -1))
    return wins[..., ::sh, ::sw, :, :]


def correlate2d_valid(x: np.ndarray, kernel: np.ndarray,
                      stride: tuple[int, int] = (1, 1)) -> np.ndarray:
    """Valid (unpadded) strided correlation over the last two axes.

    Output extent per axis is floor((n - k) / stride) + 1; each output
    cell is the kernel-weighted sum over its window.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    kh, kw = kernel.shape
    h, w = x.shape[-2:]
    if kh > h or kw > w:
        raise ValueError(
            f"kernel {kh}x{kw} does not fit input {h}x{w}")
    wins = sliding_windows(np.asarray(x, dtype=np.float64), kh, kw, stride)
    return np.tensordot(wins, kernel, axes=([-2, -1], [0, 1]))


def pad_mirror(x: np.ndarray, pad: int) -> np.ndarray:
    """Reflect the last two axes by `pad` without repeating the edge."""
    if pad < 0:
        raise ValueError(f"pad must be non-negative, got {pad}")
    h, w = x.shape[-2:]
    if pad >= min(h, w):
        raise ValueError(f"pad {pad} must be smaller than both extents {h}x{w}")
    if pad == 0:
        return np.array(x, dtype=np.float64, copy=True)
    widths = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (pad, pad)]
    return np.pad(np.asarray(x, dtype=np.float64), widths, mode="reflect")


def _reflect_sources(n: int, before: int, after: int) -> np.ndarray:
    """Interior index that each padded position mirrors, per axis."""
    t = np.arange(-before, n + after)
    if n == 1:
        return np.zeros_like(t)
    period = 2 * n - 2
    u = np.mod(t, period)
    return np.where(u < n, u, period - u)


def _pad_reflect(x: np.ndarray, before: int, after: int) -> np.ndarray:
    widths = [(0, 0)] * (x.ndim - 2) + [(before, after), (before, after)]
    return np.pad(x, widths, mode="reflect")


def pad_reflect_adjoint(g: np.ndarray, out_h: int, out_w: int,
                        before: int, after: int) -> np.ndarray:
    """Exact adjoint of reflect padding: fold border gradients back.

    `g` has shape (..., out_h + before + after, out_w + before + after);
    every padded cell adds into the interior cell it was copied from.
    """
    src_i = _reflect_sources(out_h, before, after)
    src_j = _reflect_sources(out_w, before, after)
    lead = g.shape[:-2]
    out = np.zeros(lead + (out_h, out_w), dtype=np.float64)
    flat = out.reshape(-1, out_h, out_w)
    gflat = g.reshape(-1, g.shape[-2], g.shape[-1])
    ii = src_i[:, None]
    jj = src_j[None, :]
    for c in range(flat.shape[0]):
        np.add.at(flat[c], (ii, jj), gflat[c])
    return out


def smooth_same(x: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Gaussian-smooth the last two axes at unchanged size (mirror border)."""
    k = kernel.size
    before, after = (k - 1) // 2, k // 2
    padded = _pad_reflect(np.asarray(x, dtype=np.float64), before, after)
    return correlate2d_valid(padded, kernel.weights)


def smooth_same_adjoint(g: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Adjoint of `smooth_same` for the same kernel and border policy."""
    k = kernel.size
    before, after = (k - 1) // 2, k // 2
    h, w = g.shape[-2:]
    ph, pw = h + before + after, w + before + after
    gp = np.zeros(g.shape[:-2] + (ph, pw), dtype=np.float64)
    for p in range(k):
        for q in range(k):
            gp[..., p:p + h, q:q + w] += kernel.weights[p, q] * g
    return pad_reflect_adjoint(gp, h, w, before, after)
