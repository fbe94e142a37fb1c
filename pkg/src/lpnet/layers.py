"""Differentiable layers with exact backward passes.

Layers hold their parameters but no per-call state: forward and backward
are pure functions of (parameters, arguments), so read-only layers can be
shared across concurrent evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import GaussianKernel, sliding_windows, smooth_same, smooth_same_adjoint


@dataclass
class LayerGrads:
    """Gradients produced by one backward step.

    `weight`/`bias` are None for parameterless layers; `input` always
    matches the layer input's shape.
    """

    input: np.ndarray
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None


class Conv2d:
    """Valid (unpadded) multichannel correlation plus per-channel bias."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 4:
            raise ValueError(f"conv weight must be 4-d, got shape {weight.shape}")
        if bias.shape != (weight.shape[0],):
            raise ValueError(
                f"bias shape {bias.shape} does not match {weight.shape[0]} output channels")
        self.weight = weight
        self.bias = bias

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    def _patches(self, x: np.ndarray) -> np.ndarray:
        """(H'*W', cin*kh*kw) patch matrix for matmul-based correlation."""
        cout, cin, kh, kw = self.weight.shape
        wins = np.lib.stride_tricks.sliding_window_view(x, (cin, kh, kw))
        return wins.reshape(-1, cin * kh * kw)

    def forward(self, x: np.ndarray) -> np.ndarray:
        cout, cin, kh, kw = self.weight.shape
        if x.ndim != 3 or x.shape[0] != cin:
            raise ValueError(
                f"expected input with {cin} channels, got shape {x.shape}")
        if x.shape[1] < kh or x.shape[2] < kw:
            raise ValueError(
                f"kernel {kh}x{kw} does not fit input {x.shape[1]}x{x.shape[2]}")
        h_out, w_out = x.shape[1] - kh + 1, x.shape[2] - kw + 1
        out = self._patches(x) @ self.weight.reshape(cout, -1).T
        return out.T.reshape(cout, h_out, w_out) + self.bias[:, None, None]

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> LayerGrads:
        cout, cin, kh, kw = self.weight.shape
        h_out = x.shape[1] - kh + 1
        w_out = x.shape[2] - kw + 1
        if grad_out.shape != (cout, h_out, w_out):
            raise ValueError(
                f"upstream gradient shape {grad_out.shape} does not match "
                f"output shape {(cout, h_out, w_out)}")
        gy = grad_out.reshape(cout, -1)
        gw = (gy @ self._patches(x)).reshape(self.weight.shape)
        gb = grad_out.sum(axis=(1, 2))
        # Input gradient: every output cell spreads its gradient over the
        # kh x kw input patch it read, weighted by the kernel.
        t = np.tensordot(self.weight, grad_out, axes=([0], [0]))
        gx = np.zeros_like(x)
        for p in range(kh):
            for q in range(kw):
                gx[:, p:p + h_out, q:q + w_out] += t[:, p, q]
        return LayerGrads(input=gx, weight=gw, bias=gb)


class LpPool:
    """Windowed power mean of |input| with Gaussian weights.

    For finite p the output per window is (sum |I|^p * G)^(1/p), evaluated
    in max-factored form m * (sum (|I|/m)^p * G)^(1/p) with m the window
    max of |I|, which keeps every intermediate in [0, 1] no matter how
    large p or the inputs get. p = inf is the window max of |I|.
    """

    def __init__(self, p: float, window: GaussianKernel,
                 stride: tuple[int, int] = (2, 2)):
        if not p >= 1:
            raise ValueError(f"pooling exponent must be >= 1, got {p}")
        self.p = float(p)
        self.window = window
        self.stride = (int(stride[0]), int(stride[1]))

    def forward(self, x: np.ndarray) -> np.ndarray:
        k = self.window.size
        if x.shape[-2] < k or x.shape[-1] < k:
            raise ValueError(
                f"window {k}x{k} does not fit input {x.shape[-2]}x{x.shape[-1]}")
        a = np.abs(sliding_windows(x, k, k, self.stride))
        m = a.max(axis=(-2, -1))
        if math.isinf(self.p):
            return m
        safe = np.where(m > 0, m, 1.0)
        r = a / safe[..., None, None]
        s = np.tensordot(r ** self.p, self.window.weights, axes=([-2, -1], [0, 1]))
        return np.where(m > 0, safe * s ** (1.0 / self.p), 0.0)

    def backward(self, x: np.ndarray, out: np.ndarray,
                 grad_out: np.ndarray) -> LayerGrads:
        if grad_out.shape != out.shape:
            raise ValueError(
                f"upstream gradient shape {grad_out.shape} does not match "
                f"output shape {out.shape}")
        k = self.window.size
        wins = sliding_windows(x, k, k, self.stride)
        a = np.abs(wins)
        if math.isinf(self.p):
            # All gradient goes to the first (row-major) arg-max of |I|.
            flat = a.reshape(a.shape[:-2] + (k * k,))
            idx = flat.argmax(axis=-1)
            onehot = np.zeros_like(flat)
            np.put_along_axis(onehot, idx[..., None], 1.0, axis=-1)
            onehot = onehot.reshape(a.shape)
            gwin = onehot * np.sign(wins) * grad_out[..., None, None]
        else:
            safe_out = np.where(out > 0, out, 1.0)
            t = a / safe_out[..., None, None]
            gwin = (self.window.weights * np.sign(wins) * t ** (self.p - 1.0)
                    * grad_out[..., None, None])
            gwin = np.where((out[..., None, None] > 0) & (a > 0), gwin, 0.0)
        return LayerGrads(input=_scatter_windows(gwin, x.shape, self.stride))


def _scatter_windows(gwin: np.ndarray, in_shape: tuple[int, ...],
                     stride: tuple[int, int]) -> np.ndarray:
    """Accumulate per-window gradients back onto the input grid."""
    sh, sw = stride
    hp, wp = gwin.shape[-4:-2]
    k1, k2 = gwin.shape[-2:]
    gx = np.zeros(in_shape, dtype=np.float64)
    for p in range(k1):
        for q in range(k2):
            gx[..., p:p + hp * sh:sh, q:q + wp * sw:sw] += gwin[..., p, q]
    return gx


class SubtractiveNorm:
    """Subtract the Gaussian-weighted local mean, per channel.

    Spatial size is preserved via mirror padding; the backward pass is the
    exact adjoint of this linear map.
    """

    def __init__(self, kernel: GaussianKernel):
        self.kernel = kernel

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x - smooth_same(x, self.kernel)

    def backward(self, grad_out: np.ndarray) -> LayerGrads:
        return LayerGrads(input=grad_out - smooth_same_adjoint(grad_out, self.kernel))


def tanh_forward(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Gradient from the cached output: d tanh(x)/dx = 1 - tanh(x)^2."""
    return grad_out * (1.0 - out * out)


class Linear:
    """Affine map out = W @ in + b on flat vectors."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ValueError(
                f"inconsistent linear shapes: weight {weight.shape}, bias {bias.shape}")
        self.weight = weight
        self.bias = bias

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.weight.shape[1],):
            raise ValueError(
                f"expected input of length {self.weight.shape[1]}, got shape {x.shape}")
        return self.weight @ x + self.bias

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> LayerGrads:
        if grad_out.shape != (self.weight.shape[0],):
            raise ValueError(
                f"upstream gradient length {grad_out.shape} does not match "
                f"{self.weight.shape[0]} outputs")
        return LayerGrads(
            input=self.weight.T @ grad_out,
            weight=np.outer(grad_out, x),
            bias=grad_out.copy(),
        )


def concat_features(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flatten both inputs and join them, `a` first."""
    return np.concatenate([np.ravel(a), np.ravel(b)])


def split_features_grad(grad: np.ndarray, n_first: int) -> tuple[np.ndarray, np.ndarray]:
    return grad[:n_first], grad[n_first:]


def softmax_nll(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Per-sample energy and its gradient with respect to the logits.

    energy = log(sum exp(logits)) - logits[target], computed with a max
    shift so arbitrarily large logits stay finite; grad = softmax - onehot.
    """
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    if not 0 <= target < n:
        raise ValueError(f"target {target} out of range for {n} classes")
    shift = logits - logits.max()
    exp = np.exp(shift)
    z = exp.sum()
    energy = float(np.log(z) - shift[target])
    grad = exp / z
    grad[target] -= 1.0
    return energy, grad
