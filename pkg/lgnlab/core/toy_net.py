"""单滤波器玩具网络：28×28 → 13×13 有效卷积 (+bias) → ReLU → 全连接 2×256 → softmax。"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .errors import DimensionError

INPUT_SIDE = 28
PSI0_SIDE = 13
FEATURE_SIDE = INPUT_SIDE - PSI0_SIDE + 1
FEATURE_LEN = FEATURE_SIDE * FEATURE_SIDE
CLASSES = 2


@dataclass(slots=True)
class ToyModel:
    psi0: np.ndarray
    conv_bias: float
    fc_weights: np.ndarray
    fc_bias: np.ndarray

    def __post_init__(self) -> None:
        self.psi0 = np.array(self.psi0, dtype=np.float64)
        self.conv_bias = float(self.conv_bias)
        self.fc_weights = np.array(self.fc_weights, dtype=np.float64)
        self.fc_bias = np.array(self.fc_bias, dtype=np.float64).reshape(-1)
        if self.psi0.shape != (PSI0_SIDE, PSI0_SIDE):
            raise DimensionError(f"psi0 必须是 {PSI0_SIDE}x{PSI0_SIDE}，实际 {self.psi0.shape}")
        if self.fc_weights.shape != (CLASSES, FEATURE_LEN):
            raise DimensionError(f"fc_weights 必须是 {CLASSES}x{FEATURE_LEN}，实际 {self.fc_weights.shape}")
        if self.fc_bias.shape != (CLASSES,):
            raise DimensionError(f"fc_bias 必须有 {CLASSES} 个元素，实际 {self.fc_bias.shape}")

    @classmethod
    def zeros(cls) -> "ToyModel":
        return cls(
            psi0=np.zeros((PSI0_SIDE, PSI0_SIDE)),
            conv_bias=0.0,
            fc_weights=np.zeros((CLASSES, FEATURE_LEN)),
            fc_bias=np.zeros(CLASSES),
        )

    @classmethod
    def init(cls, seed: int = 0) -> "ToyModel":
        """psi0 ~ U(±1/13)，fc ~ U(±1/16)，偏置为 0"""
        rng = np.random.default_rng(seed)
        psi_scale = 1.0 / PSI0_SIDE
        fc_scale = 1.0 / np.sqrt(FEATURE_LEN)
        return cls(
            psi0=rng.uniform(-psi_scale, psi_scale, size=(PSI0_SIDE, PSI0_SIDE)),
            conv_bias=0.0,
            fc_weights=rng.uniform(-fc_scale, fc_scale, size=(CLASSES, FEATURE_LEN)),
            fc_bias=np.zeros(CLASSES),
        )

    def copy(self) -> "ToyModel":
        return ToyModel(self.psi0.copy(), self.conv_bias, self.fc_weights.copy(), self.fc_bias.copy())


@dataclass(slots=True)
class Gradients:
    psi0: np.ndarray
    conv_bias: float
    fc_weights: np.ndarray
    fc_bias: np.ndarray

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            self.psi0 * factor,
            self.conv_bias * factor,
            self.fc_weights * factor,
            self.fc_bias * factor,
        )


@dataclass(slots=True)
class ForwardCache:
    windows: np.ndarray
    pre_activation: np.ndarray
    features: np.ndarray
    probabilities: np.ndarray


def _as_batch(images: np.ndarray) -> tuple[np.ndarray, bool]:
    images = np.asarray(images, dtype=np.float64)
    single = images.ndim == 2
    if single:
        images = images[None]
    if images.ndim != 3 or images.shape[1:] != (INPUT_SIDE, INPUT_SIDE):
        raise DimensionError(f"输入必须是 {INPUT_SIDE}x{INPUT_SIDE} 图像或其批次，实际 {images.shape}")
    return images, single


def forward(model: ToyModel, images: np.ndarray) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """返回 (logits, probabilities, cache)；单张图输入时 logits 形状为 (2,)"""
    batch, single = _as_batch(images)
    windows = sliding_window_view(batch, (PSI0_SIDE, PSI0_SIDE), axis=(1, 2))
    # 真卷积：窗口与翻转后的核逐元素相乘
    pre = np.einsum("bijkl,kl->bij", windows, model.psi0[::-1, ::-1]) + model.conv_bias
    features = np.maximum(pre, 0.0).reshape(len(batch), FEATURE_LEN)
    logits = features @ model.fc_weights.T + model.fc_bias
    probabilities = special.softmax(logits, axis=-1)
    cache = ForwardCache(windows, pre, features, probabilities)
    if single:
        return logits[0], probabilities[0], cache
    return logits, probabilities, cache


def loss(logits: np.ndarray, labels: np.ndarray | int) -> np.ndarray | float:
    """L = log Σ_z e^{F_z − F_z̃} + F_z̃ − F_y，z̃ = argmax F"""
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    batch = logits[None] if single else logits
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    top = batch.max(axis=1)
    shifted = np.log(np.exp(batch - top[:, None]).sum(axis=1))
    values = shifted + top - batch[np.arange(len(batch)), labels]
    return float(values[0]) if single else values


def reference_loss(logits: np.ndarray, labels: np.ndarray | int) -> np.ndarray | float:
    """−log softmax(F)_y"""
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    batch = logits[None] if single else logits
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    values = -special.log_softmax(batch, axis=1)[np.arange(len(batch)), labels]
    return float(values[0]) if single else values


def backward(model: ToyModel, cache: ForwardCache, labels: np.ndarray | int) -> Gradients:
    """批次内梯度求和（不取平均），ReLU 在 0 处导数取 0"""
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    probabilities = np.atleast_2d(cache.probabilities)
    count = len(probabilities)
    d_logits = probabilities.copy()
    d_logits[np.arange(count), labels] -= 1.0

    g_fc_weights = d_logits.T @ cache.features
    g_fc_bias = d_logits.sum(axis=0)
    d_features = (d_logits @ model.fc_weights).reshape(cache.pre_activation.shape)
    d_pre = d_features * (cache.pre_activation > 0.0)
    g_conv_bias = float(d_pre.sum())
    g_flipped = np.einsum("bij,bijkl->kl", d_pre, cache.windows)
    return Gradients(
        psi0=np.ascontiguousarray(g_flipped[::-1, ::-1]),
        conv_bias=g_conv_bias,
        fc_weights=g_fc_weights,
        fc_bias=g_fc_bias,
    )


def predict(model: ToyModel, images: np.ndarray) -> np.ndarray:
    logits, _, _ = forward(model, images)
    return np.atleast_2d(logits).argmax(axis=1)
