"""Two-stage convolutional network with configurable pooling exponent.

Each feature stage is convolution -> tanh -> Lp pooling -> subtractive
normalization. The multi-stage variant additionally pools the stage-1
normalized maps once more and feeds them to the classifier next to the
stage-2 features; the single-stage variant feeds stage-2 features only.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import data as dio
from .kernels import gaussian_kernel
from .layers import (
    Conv2d,
    Linear,
    LpPool,
    SubtractiveNorm,
    concat_features,
    split_features_grad,
    tanh_backward,
    tanh_forward,
)


@dataclass(frozen=True)
class ModelConfig:
    pooling_p: float = 2.0
    multi_stage: bool = True
    stage1_features: int = 16
    stage2_features: int = 512
    hidden_units: int = 20
    conv1_kernel: int = 5
    conv2_kernel: int = 7
    pool_window: int = 2
    pool_stride: int = 2
    norm_kernel: int = 5
    input_channels: int = 3
    input_size: int = 32
    n_classes: int = 10
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.pooling_p):
            d["pooling_p"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if d.get("pooling_p") == "inf":
            d["pooling_p"] = math.inf
        return cls(**d)


def _pooled_extent(extent: int, window: int, stride: int, layer: str) -> int:
    if extent < window:
        raise ValueError(
            f"invalid configuration at layer '{layer}': map extent {extent} "
            f"smaller than {window}x{window} pooling window")
    if (extent - window) % stride != 0:
        raise ValueError(
            f"invalid configuration at layer '{layer}': extent {extent} with "
            f"{window}x{window} window and stride {stride} does not tile evenly")
    return (extent - window) // stride + 1


def _conv_extent(extent: int, kernel: int, layer: str) -> int:
    out = extent - kernel + 1
    if out < 1:
        raise ValueError(
            f"invalid configuration at layer '{layer}': {kernel}x{kernel} kernel "
            f"does not fit a {extent}x{extent} map")
    return out


def _check_norm(extent: int, kernel: int, layer: str) -> None:
    pad = max((kernel - 1) // 2, kernel // 2)
    if pad >= extent:
        raise ValueError(
            f"invalid configuration at layer '{layer}': {kernel}x{kernel} "
            f"normalization kernel needs mirror pad {pad} on a {extent}-wide map")


def shape_plan(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Derive every intermediate shape, or raise naming the offending layer.

    With defaults: input 3x32x32 -> conv1 16x28x28 -> pool1 16x14x14 ->
    norm1 -> conv2 512x8x8 -> pool2 512x4x4 -> norm2 -> flatten 8192;
    the multi-stage branch adds pool(norm1) 16x7x7 = 784 for a classifier
    input of 8976.
    """
    for name in ("stage1_features", "stage2_features", "hidden_units",
                 "conv1_kernel", "conv2_kernel", "pool_window", "pool_stride",
                 "norm_kernel", "input_channels", "input_size", "n_classes"):
        if getattr(config, name) < 1:
            raise ValueError(f"invalid configuration: {name} must be positive")
    if not config.pooling_p >= 1:
        raise ValueError(
            f"invalid configuration: pooling exponent must be >= 1, got {config.pooling_p}")

    s = config.input_size
    plan: list[tuple[str, tuple[int, ...]]] = [
        ("input", (config.input_channels, s, s))]

    s1 = _conv_extent(s, config.conv1_kernel, "conv1")
    plan.append(("conv1", (config.stage1_features, s1, s1)))
    p1 = _pooled_extent(s1, config.pool_window, config.pool_stride, "pool1")
    plan.append(("pool1", (config.stage1_features, p1, p1)))
    _check_norm(p1, config.norm_kernel, "norm1")
    plan.append(("norm1", (config.stage1_features, p1, p1)))

    s2 = _conv_extent(p1, config.conv2_kernel, "conv2")
    plan.append(("conv2", (config.stage2_features, s2, s2)))
    p2 = _pooled_extent(s2, config.pool_window, config.pool_stride, "pool2")
    plan.append(("pool2", (config.stage2_features, p2, p2)))
    _check_norm(p2, config.norm_kernel, "norm2")
    plan.append(("norm2", (config.stage2_features, p2, p2)))

    n_features = config.stage2_features * p2 * p2
    if config.multi_stage:
        b = _pooled_extent(p1, config.pool_window, config.pool_stride, "branch_pool")
        plan.append(("branch_pool", (config.stage1_features, b, b)))
        n_features += config.stage1_features * b * b
    plan.append(("features", (n_features,)))
    plan.append(("hidden", (config.hidden_units,)))
    plan.append(("logits", (config.n_classes,)))
    return plan


@dataclass
class ForwardCache:
    """Intermediates a backward pass needs; never shared across calls."""

    x: np.ndarray
    h1: np.ndarray          # tanh(conv1)
    pool1: np.ndarray
    norm1: np.ndarray
    h2: np.ndarray          # tanh(conv2)
    pool2: np.ndarray
    norm2: np.ndarray
    branch: np.ndarray | None
    features: np.ndarray
    hidden: np.ndarray      # tanh(fc1)
    logits: np.ndarray


class Model:
    """Parameter container plus full forward/backward passes."""

    def __init__(self, config: ModelConfig, conv1: Conv2d, conv2: Conv2d,
                 fc1: Linear, fc2: Linear):
        self.config = config
        self.plan = dict(shape_plan(config))
        self.conv1 = conv1
        self.conv2 = conv2
        self.fc1 = fc1
        self.fc2 = fc2
        window = gaussian_kernel(config.pool_window)
        stride = (config.pool_stride, config.pool_stride)
        self.pool = LpPool(config.pooling_p, window, stride)
        self.branch_pool = LpPool(config.pooling_p, window, stride)
        self.norm = SubtractiveNorm(gaussian_kernel(config.norm_kernel))

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays in checkpoint order."""
        return {
            "conv1.weight": self.conv1.weight,
            "conv1.bias": self.conv1.bias,
            "conv2.weight": self.conv2.weight,
            "conv2.bias": self.conv2.bias,
            "fc1.weight": self.fc1.weight,
            "fc1.bias": self.fc1.bias,
            "fc2.weight": self.fc2.weight,
            "fc2.bias": self.fc2.bias,
        }

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def _expect(self, name: str, arr: np.ndarray) -> None:
        if arr.shape != self.plan[name]:
            raise RuntimeError(
                f"shape plan violated at '{name}': planned {self.plan[name]}, "
                f"got {arr.shape}")

    def forward(self, x: np.ndarray, target: int | None = None
                ) -> tuple[np.ndarray, float | None, ForwardCache]:
        from .layers import softmax_nll

        x = np.asarray(x, dtype=np.float64)
        self._expect("input", x)
        h1 = tanh_forward(self.conv1.forward(x))
        self._expect("conv1", h1)
        pool1 = self.pool.forward(h1)
        self._expect("pool1", pool1)
        norm1 = self.norm.forward(pool1)
        self._expect("norm1", norm1)

        h2 = tanh_forward(self.conv2.forward(norm1))
        self._expect("conv2", h2)
        pool2 = self.pool.forward(h2)
        self._expect("pool2", pool2)
        norm2 = self.norm.forward(pool2)
        self._expect("norm2", norm2)

        branch = None
        if self.config.multi_stage:
            branch = self.branch_pool.forward(norm1)
            self._expect("branch_pool", branch)
            features = concat_features(norm2, branch)
        else:
            features = np.ravel(norm2)
        self._expect("features", features)

        hidden = tanh_forward(self.fc1.forward(features))
        self._expect("hidden", hidden)
        logits = self.fc2.forward(hidden)
        self._expect("logits", logits)

        energy = None
        if target is not None:
            energy, _ = softmax_nll(logits, target)
        return logits, energy, ForwardCache(
            x=x, h1=h1, pool1=pool1, norm1=norm1, h2=h2, pool2=pool2,
            norm2=norm2, branch=branch, features=features, hidden=hidden,
            logits=logits)

    def backward(self, cache: ForwardCache, loss_grad: np.ndarray
                 ) -> dict[str, np.ndarray]:
        """Exact parameter gradients for the forward pass that built `cache`."""
        if cache.logits.shape != self.plan["logits"] \
                or cache.features.shape != self.plan["features"] \
                or cache.x.shape != self.plan["input"]:
            raise RuntimeError(
                "stale cache: cached shapes do not match this model's plan")
        loss_grad = np.asarray(loss_grad, dtype=np.float64)
        if loss_grad.shape != cache.logits.shape:
            raise ValueError(
                f"loss gradient shape {loss_grad.shape} does not match logits "
                f"{cache.logits.shape}")

        g_fc2 = self.fc2.backward(cache.hidden, loss_grad)
        g_hidden_in = tanh_backward(cache.hidden, g_fc2.input)
        g_fc1 = self.fc1.backward(cache.features, g_hidden_in)

        if self.config.multi_stage:
            n2 = cache.norm2.size
            g_norm2_flat, g_branch_flat = split_features_grad(g_fc1.input, n2)
            g_branch = g_branch_flat.reshape(cache.branch.shape)
        else:
            g_norm2_flat = g_fc1.input
            g_branch = None
        g_norm2 = g_norm2_flat.reshape(cache.norm2.shape)

        g_pool2 = self.norm.backward(g_norm2).input
        g_h2 = self.pool.backward(cache.h2, cache.pool2, g_pool2).input
        g_conv2_out = tanh_backward(cache.h2, g_h2)
        g_conv2 = self.conv2.backward(cache.norm1, g_conv2_out)

        g_norm1 = g_conv2.input
        if g_branch is not None:
            g_norm1 = g_norm1 + self.branch_pool.backward(
                cache.norm1, cache.branch, g_branch).input

        g_pool1 = self.norm.backward(g_norm1).input
        g_h1 = self.pool.backward(cache.h1, cache.pool1, g_pool1).input
        g_conv1_out = tanh_backward(cache.h1, g_h1)
        g_conv1 = self.conv1.backward(cache.x, g_conv1_out)

        return {
            "conv1.weight": g_conv1.weight,
            "conv1.bias": g_conv1.bias,
            "conv2.weight": g_conv2.weight,
            "conv2.bias": g_conv2.bias,
            "fc1.weight": g_fc1.weight,
            "fc1.bias": g_fc1.bias,
            "fc2.weight": g_fc2.weight,
            "fc2.bias": g_fc2.bias,
        }


def build_model(config: ModelConfig, seed: int | None = None) -> Model:
    """Initialize parameters uniform on +-sqrt(1/fan_in), biases zero.

    Deterministic given the seed; the same seed reproduces bit-identical
    parameters.
    """
    if seed is not None:
        config = replace(config, seed=seed)
    plan = dict(shape_plan(config))
    rng = np.random.default_rng(config.seed)

    def uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = math.sqrt(1.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    c = config
    k1, k2 = c.conv1_kernel, c.conv2_kernel
    conv1 = Conv2d(
        uniform((c.stage1_features, c.input_channels, k1, k1),
                c.input_channels * k1 * k1),
        np.zeros(c.stage1_features))
    conv2 = Conv2d(
        uniform((c.stage2_features, c.stage1_features, k2, k2),
                c.stage1_features * k2 * k2),
        np.zeros(c.stage2_features))
    n_features = plan["features"][0]
    fc1 = Linear(uniform((c.hidden_units, n_features), n_features),
                 np.zeros(c.hidden_units))
    fc2 = Linear(uniform((c.n_classes, c.hidden_units), c.hidden_units),
                 np.zeros(c.n_classes))
    return Model(config, conv1, conv2, fc1, fc2)


def _record_size(arr: np.ndarray) -> int:
    return 8 + 4 * arr.ndim + arr.size * arr.itemsize


def save_checkpoint(model: Model, path) -> None:
    """Write config and parameters as a manifest plus tensor records.

    The file opens with the shared container magic; record 0 is a JSON
    manifest (u8 bytes) naming each parameter, its shape, and its record's
    byte offset relative to the end of the manifest record. The parameter
    tensors follow as f64 records in manifest order.
    """
    params = {name: arr.astype(np.float64) for name, arr in model.parameters().items()}
    tensors = []
    offset = 0
    for name, arr in params.items():
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += _record_size(arr)
    manifest = {
        "kind": "model-checkpoint",
        "config": model.config.to_dict(),
        "tensors": tensors,
    }
    blob = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(dio.MAGIC)
        f.write(struct.pack("<I", dio.VERSION))
        dio.write_record(f, np.frombuffer(blob, dtype=np.uint8))
        for arr in params.values():
            dio.write_record(f, arr)


def load_checkpoint(path) -> Model:
    """Rebuild a model from a checkpoint file, verifying the manifest."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != dio.MAGIC:
            raise dio.FormatError(f"bad magic {magic!r} at byte 0")
        version = struct.unpack("<I", f.read(4))[0]
        if version != dio.VERSION:
            raise dio.FormatError(f"unsupported checkpoint version {version}")
        manifest = json.loads(dio.read_record(f).tobytes().decode())
        if manifest.get("kind") != "model-checkpoint":
            raise dio.FormatError(f"not a model checkpoint: kind={manifest.get('kind')!r}")
        config = ModelConfig.from_dict(manifest["config"])
        model = build_model(config)
        params = model.parameters()
        base = f.tell()
        for entry in manifest["tensors"]:
            name = entry["name"]
            if name not in params:
                raise dio.FormatError(f"unknown tensor {name!r} in checkpoint manifest")
            if f.tell() - base != int(entry["offset"]):
                raise dio.FormatError(
                    f"checkpoint record {name!r} at byte {f.tell()}, manifest "
                    f"says {base + int(entry['offset'])}")
            arr = dio.read_record(f)
            if arr.shape != tuple(entry["shape"]) or arr.shape != params[name].shape:
                raise dio.FormatError(
                    f"checkpoint tensor {name!r} has shape {arr.shape}, "
                    f"expected {tuple(entry['shape'])}")
            params[name][...] = arr
    return model
