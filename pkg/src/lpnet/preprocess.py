"""Sample preprocessing: YUV conversion, local contrast normalization of
the luma channel, global contrast normalization of every channel."""

from __future__ import annotations

import numpy as np

from .kernels import GaussianKernel, gaussian_kernel, smooth_same

#: BT.601 luma weights and the matching chroma scale factors.
_YUV = np.array([
    [0.299, 0.587, 0.114],
    [-0.299 * 0.492, -0.587 * 0.492, (1 - 0.114) * 0.492],
    [(1 - 0.299) * 0.877, -0.587 * 0.877, -0.114 * 0.877],
])

LCN_KERNEL_SIZE = 7


def rgb_to_yuv(pixels: np.ndarray) -> np.ndarray:
    """Convert a (3, H, W) RGB image to YUV (BT.601 primaries)."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got shape {pixels.shape}")
    return np.einsum("kc,chw->khw", _YUV, pixels)


def local_contrast_normalize(y: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Subtractive then divisive contrast normalization of one map.

    v = y - smooth(y); sigma = sqrt(smooth(v^2)); output = v / divisor
    where divisor floors the local deviation at its image-wide mean, so
    flat regions are not blown up. A constant image maps to zeros, and
    the result is invariant to y -> a*y + b for a > 0.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"expected a 2-d map, got shape {y.shape}")
    k = kernel.size
    if min(y.shape) < k:
        raise ValueError(f"image {y.shape} smaller than {k}x{k} kernel")
    v = y - smooth_same(y, kernel)
    sigma = np.sqrt(np.maximum(smooth_same(v * v, kernel), 0.0))
    divisor = np.maximum(sigma.mean(), sigma)
    # divisor is zero only when the whole image is constant (v == 0).
    return np.where(divisor > 0, v / np.where(divisor > 0, divisor, 1.0), 0.0)


def global_contrast_normalize(channel: np.ndarray) -> np.ndarray:
    """Standardize one channel to zero mean, unit (population) variance."""
    channel = np.asarray(channel, dtype=np.float64)
    return (channel - channel.mean()) / max(channel.std(), 1e-8)


def preprocess_sample(pixels: np.ndarray,
                      kernel: GaussianKernel | None = None) -> np.ndarray:
    """Full per-sample pipeline on a (3, H, W) RGB image in [0, 1].

    YUV conversion, then local contrast normalization of Y only, then
    global contrast normalization of all three channels. Deterministic.
    """
    if kernel is None:
        kernel = gaussian_kernel(LCN_KERNEL_SIZE)
    yuv = rgb_to_yuv(pixels)
    yuv[0] = local_contrast_normalize(yuv[0], kernel)
    return np.stack([global_contrast_normalize(c) for c in yuv])


def preprocess_images(images: np.ndarray,
                      kernel: GaussianKernel | None = None) -> np.ndarray:
    """Preprocess a batch of (N, 3, H, W) images.

    uint8 input is scaled to [0, 1] first; float input is used as-is.
    """
    images = np.asarray(images)
    if images.ndim != 4 or images.shape[1] != 3:
        raise ValueError(f"expected (N, 3, H, W) images, got shape {images.shape}")
    if images.dtype == np.uint8:
        images = images.astype(np.float64) / 255.0
    else:
        images = images.astype(np.float64)
    if kernel is None:
        kernel = gaussian_kernel(LCN_KERNEL_SIZE)
    return np.stack([preprocess_sample(img, kernel) for img in images])
