"""Deterministic synthetic digit imagery for desk-scale experiments.

Two flavors: clean grayscale glyphs (IDX-style benchmark substitute) and
harder color samples with textured backgrounds, color jitter and partial
neighbor digits at the frame edges.
"""

from __future__ import annotations

import numpy as np

from .kernels import gaussian_kernel, smooth_same

_FONT = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00110", "01000", "10000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}

_GLYPHS = np.stack([
    np.array([[float(ch) for ch in row] for row in _FONT[d]]) for d in range(10)
])  # (10, 7, 5)

_BLUR = gaussian_kernel(3, 0.7)


def _glyph_mask(digit: int, size: int, rng: np.random.Generator,
                dx: float = 0.0, dy: float = 0.0) -> np.ndarray:
    """Rasterize one glyph with random scale/rotation/offset, bilinear."""
    glyph = _GLYPHS[digit]
    gh, gw = glyph.shape
    height = rng.uniform(0.45, 0.75) * size
    sy = height / gh
    sx = sy * rng.uniform(0.75, 1.1)
    theta = rng.uniform(-0.18, 0.18)
    cy = size / 2 + dy + rng.uniform(-2.0, 2.0)
    cx = size / 2 + dx + rng.uniform(-2.0, 2.0)

    rr, cc = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64), indexing="ij")
    u, v = rr - cy, cc - cx
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    gy = (cos_t * u + sin_t * v) / sy + (gh - 1) / 2
    gx = (-sin_t * u + cos_t * v) / sx + (gw - 1) / 2

    y0 = np.floor(gy).astype(int)
    x0 = np.floor(gx).astype(int)
    fy, fx = gy - y0, gx - x0

    def sample(yi, xi):
        inside = (yi >= 0) & (yi < gh) & (xi >= 0) & (xi < gw)
        return np.where(inside, glyph[np.clip(yi, 0, gh - 1), np.clip(xi, 0, gw - 1)], 0.0)

    mask = ((1 - fy) * (1 - fx) * sample(y0, x0)
            + (1 - fy) * fx * sample(y0, x0 + 1)
            + fy * (1 - fx) * sample(y0 + 1, x0)
            + fy * fx * sample(y0 + 1, x0 + 1))
    return smooth_same(np.clip(mask, 0.0, 1.0), _BLUR)


def grayscale_digits(n: int, seed: int, size: int = 28
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Clean (N, size, size) u8 grayscale digits with balanced labels."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    images = np.empty((n, size, size), dtype=np.uint8)
    for i in range(n):
        mask = _glyph_mask(int(labels[i]), size, rng)
        bg = rng.uniform(0.0, 0.25)
        fg = rng.uniform(0.6, 1.0)
        img = bg + (fg - bg) * mask
        img += rng.normal(0.0, 0.04, size=(size, size))
        images[i] = (np.clip(img, 0.0, 1.0) * 255).round().astype(np.uint8)
    return images, labels


def _background(size: int, rng: np.random.Generator, clutter: float) -> np.ndarray:
    """Smooth colored clutter: low-frequency noise plus a linear ramp."""
    coarse = rng.uniform(0.0, 1.0, size=(3, 4, 4))
    axis = np.linspace(0, 3, size)
    i0 = np.clip(np.floor(axis).astype(int), 0, 2)
    frac = axis - i0
    rows = (coarse[:, i0, :] * (1 - frac[None, :, None])
            + coarse[:, i0 + 1, :] * frac[None, :, None])
    cols = (rows[:, :, i0] * (1 - frac[None, None, :])
            + rows[:, :, i0 + 1] * frac[None, None, :])
    ramp = rng.uniform(-0.35, 0.35, size=(3, 1, 1)) \
        * np.linspace(-1, 1, size)[None, None, :]
    base = rng.uniform(0.1, 0.9, size=(3, 1, 1))
    return np.clip(clutter * cols + base + ramp, 0.0, 1.0)


def street_digits(n: int, seed: int, size: int = 32, difficulty: float = 1.0
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Harder (N, 3, size, size) u8 color digits on cluttered backgrounds.

    Side digits bleed into the frame the way house-number crops do; only
    the centered digit determines the label. `difficulty` scales noise,
    background clutter and how often side digits intrude (0 = sterile,
    1 = default, values above 1 get grittier still).
    """
    rng = np.random.default_rng(seed)
    d = float(difficulty)
    side_prob = min(0.9, 0.5 + 0.35 * d)
    noise_lo, noise_hi = 0.02 + 0.02 * d, 0.05 + 0.05 * d
    clutter = 0.5 + 0.2 * d
    alpha_lo = max(0.55, 0.8 - 0.1 * d)
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    images = np.empty((n, 3, size, size), dtype=np.uint8)
    for i in range(n):
        img = _background(size, rng, clutter)
        luma = np.array([0.299, 0.587, 0.114])
        bg_luma = float(np.einsum("c,chw->hw", luma, img).mean())
        # Pick a digit color with enough luma contrast, either polarity.
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if bg_luma + sign * 0.35 < 0.05 or bg_luma + sign * 0.35 > 0.95:
            sign = -sign
        target_luma = np.clip(bg_luma + sign * rng.uniform(0.35, 0.6), 0.02, 0.98)
        color = np.clip(target_luma + rng.uniform(-0.15, 0.15, size=3), 0.0, 1.0)

        for side in (-1, 1):
            if rng.random() < side_prob:
                frag = _glyph_mask(int(rng.integers(0, 10)), size, rng,
                                   dx=side * rng.uniform(10, 15))
                img = img * (1 - 0.8 * frag) + color[:, None, None] * 0.8 * frag

        mask = _glyph_mask(int(labels[i]), size, rng)
        alpha = rng.uniform(alpha_lo, 1.0) * mask
        img = img * (1 - alpha) + color[:, None, None] * alpha
        img += rng.normal(0.0, rng.uniform(noise_lo, noise_hi), size=img.shape)
        images[i] = (np.clip(img, 0.0, 1.0) * 255).round().astype(np.uint8)
    return images, labels
