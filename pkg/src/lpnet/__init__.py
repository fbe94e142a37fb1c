"""Lp-pooling convolutional networks for digit classification."""

from .kernels import GaussianKernel, correlate2d_valid, gaussian_kernel, pad_mirror
from .layers import (
    Conv2d,
    LayerGrads,
    Linear,
    LpPool,
    SubtractiveNorm,
    concat_features,
    softmax_nll,
    tanh_backward,
    tanh_forward,
)
from .model import Model, ModelConfig, build_model, load_checkpoint, save_checkpoint, shape_plan
from .preprocess import (
    global_contrast_normalize,
    local_contrast_normalize,
    preprocess_images,
    preprocess_sample,
    rgb_to_yuv,
)
from .data import (
    FormatError,
    SplitSpec,
    ValidationSplit,
    build_validation_split,
    read_container,
    read_idx,
    shuffle_epoch,
    write_container,
    write_idx,
)
from .training import Metrics, TrainConfig, evaluate, lr_at, sgd_update, train_epoch
from .estimator import ConvNetClassifier, DigitPreprocessor

__version__ = "0.1.0"

__all__ = [
    "Conv2d",
    "ConvNetClassifier",
    "DigitPreprocessor",
    "FormatError",
    "GaussianKernel",
    "LayerGrads",
    "Linear",
    "LpPool",
    "Metrics",
    "Model",
    "ModelConfig",
    "SplitSpec",
    "SubtractiveNorm",
    "TrainConfig",
    "ValidationSplit",
    "build_model",
    "build_validation_split",
    "concat_features",
    "correlate2d_valid",
    "evaluate",
    "gaussian_kernel",
    "global_contrast_normalize",
    "load_checkpoint",
    "local_contrast_normalize",
    "lr_at",
    "pad_mirror",
    "preprocess_images",
    "preprocess_sample",
    "read_container",
    "read_idx",
    "rgb_to_yuv",
    "save_checkpoint",
    "sgd_update",
    "shape_plan",
    "shuffle_epoch",
    "softmax_nll",
    "tanh_backward",
    "tanh_forward",
    "train_epoch",
    "write_container",
    "write_idx",
]
