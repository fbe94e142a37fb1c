"""Scikit-learn style front door: a preprocessing transformer and a
classifier wrapping the convolutional network and its training loop."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .model import ModelConfig, build_model
from .preprocess import preprocess_images
from .training import TrainConfig, evaluate, train_epoch


def check_images(X, *, preprocessed: bool = False) -> np.ndarray:
    """Validate and coerce an (N, 3, 32, 32) image batch.

    uint8 batches are scaled to [0, 1]; float batches must already be
    finite. Preprocessed batches skip the range check (they are centered).
    """
    X = np.asarray(X)
    if X.ndim != 4 or X.shape[1:] != (3, 32, 32):
        raise ValueError(f"expected images of shape (N, 3, 32, 32), got {X.shape}")
    if X.dtype == np.uint8:
        X = X.astype(np.float64) / 255.0
    else:
        X = X.astype(np.float64)
        if not np.isfinite(X).all():
            raise ValueError("images contain NaN or infinity")
        if not preprocessed and (X.min() < -1e-9 or X.max() > 1.0 + 1e-9):
            raise ValueError("raw float images must lie in [0, 1]")
    return X


def check_labels(y, n: int, n_classes: int = 10) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes - 1}]")
    return y


class DigitPreprocessor(TransformerMixin, BaseEstimator):
    """Stateless per-sample normalization transformer.

    Converts RGB to YUV, contrast-normalizes the luma channel locally,
    then standardizes every channel globally. fit is a no-op.
    """

    def fit(self, X, y=None):
        check_images(X)
        return self

    def transform(self, X):
        return preprocess_images(check_images(X))


class ConvNetClassifier(ClassifierMixin, BaseEstimator):
    """Two-stage convolutional digit classifier trained by plain SGD.

    Parameters mirror the network and optimizer knobs; `pooling_p` may be
    math.inf for max pooling. With preprocess=True (default) raw images
    are normalized inside fit/predict, otherwise inputs are assumed to be
    already-normalized maps.
    """

    def __init__(self, pooling_p: float = 2.0, multi_stage: bool = True,
                 stage1_features: int = 16, stage2_features: int = 512,
                 hidden_units: int = 20, norm_kernel: int = 5,
                 epochs: int = 10, lr0: float = 0.01, lr_decay: float = 1e-5,
                 l2: float = 1e-5, batch_size: int = 1, seed: int = 0,
                 preprocess: bool = True):
        self.pooling_p = pooling_p
        self.multi_stage = multi_stage
        self.stage1_features = stage1_features
        self.stage2_features = stage2_features
        self.hidden_units = hidden_units
        self.norm_kernel = norm_kernel
        self.epochs = epochs
        self.lr0 = lr0
        self.lr_decay = lr_decay
        self.l2 = l2
        self.batch_size = batch_size
        self.seed = seed
        self.preprocess = preprocess

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            pooling_p=float(self.pooling_p),
            multi_stage=bool(self.multi_stage),
            stage1_features=int(self.stage1_features),
            stage2_features=int(self.stage2_features),
            hidden_units=int(self.hidden_units),
            norm_kernel=int(self.norm_kernel),
            seed=int(self.seed),
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lr0=float(self.lr0), lr_decay=float(self.lr_decay),
            l2=float(self.l2), epochs=int(self.epochs),
            batch_size=int(self.batch_size), seed=int(self.seed),
        )

    def _prepare(self, X) -> np.ndarray:
        if self.preprocess:
            return preprocess_images(check_images(X))
        return check_images(X, preprocessed=True)

    def fit(self, X, y):
        X = self._prepare(X)
        y = check_labels(y, X.shape[0])
        train_cfg = self._train_config()
        self.model_ = build_model(self._model_config())
        self.classes_ = np.arange(self.model_.config.n_classes)
        self.train_energy_ = []
        step = 0
        for epoch in range(train_cfg.epochs):
            energy, step = train_epoch(self.model_, X, y, train_cfg, epoch, step)
            self.train_energy_.append(energy)
        self.n_updates_ = step
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this classifier has not been fitted yet")

    def decision_function(self, X):
        self._check_fitted()
        X = self._prepare(X)
        out = np.empty((X.shape[0], self.model_.config.n_classes))
        for i in range(X.shape[0]):
            out[i], _, _ = self.model_.forward(X[i])
        return out

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def evaluate(self, X, y):
        """Full metrics (accuracy, confusion, energies) on a labeled set."""
        self._check_fitted()
        X = self._prepare(X)
        y = check_labels(y, X.shape[0])
        return evaluate(self.model_, X, y)
