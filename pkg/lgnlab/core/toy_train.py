from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FitFailureError, TrainingDivergedError
from .kernels import SymmetryReport, fit_gaussian, symmetrize
from .log import logger
from .toy_data import Augmentation, BinaryDataset, augment
from .toy_net import ToyModel, backward, forward, loss, predict

EVAL_BATCH = 256


@dataclass(slots=True)
class TrainConfig:
    epochs: int = 25
    lr: float = 0.01
    momentum: float = 0.9
    l2: float = 0.02
    batch_size: int = 128
    lr_drop_factor: float = 0.97
    lr_drop_period: int = 1
    seed: int = 0
    augmentation: Augmentation = Augmentation.NONE

    def __post_init__(self) -> None:
        self.augmentation = Augmentation.parse(self.augmentation)
        if int(self.epochs) < 1:
            raise ArgumentError(f"epochs 必须为正整数，实际 {self.epochs}")
        if int(self.batch_size) < 1:
            raise ArgumentError(f"batch_size 必须为正整数，实际 {self.batch_size}")
        if int(self.lr_drop_period) < 1:
            raise ArgumentError(f"lr_drop_period 必须为正整数，实际 {self.lr_drop_period}")
        if not self.lr >= 0.0 or not self.l2 >= 0.0:
            raise ArgumentError(f"lr 与 l2 不能为负: lr={self.lr} l2={self.l2}")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError(f"momentum 必须在 [0, 1) 内，实际 {self.momentum}")
        if not 0.0 < self.lr_drop_factor <= 1.0:
            raise ArgumentError(f"lr_drop_factor 必须在 (0, 1] 内，实际 {self.lr_drop_factor}")
        if int(self.seed) < 0:
            raise ArgumentError(f"seed 不能为负: {self.seed}")
        self.epochs = int(self.epochs)
        self.batch_size = int(self.batch_size)
        self.lr_drop_period = int(self.lr_drop_period)
        self.seed = int(self.seed)

    def learning_rate(self, epoch: int) -> float:
        return self.lr * self.lr_drop_factor ** (epoch // self.lr_drop_period)


@dataclass(slots=True)
class TrainReport:
    final_test_accuracy: float
    loss_curve: list[float] = field(default_factory=list)
    lr_curve: list[float] = field(default_factory=list)
    psi0_symmetry: SymmetryReport | None = None
    gaussian_fit_corr: float = math.nan


def evaluate(model: ToyModel, dataset: BinaryDataset) -> float:
    if len(dataset) == 0:
        raise ArgumentError("空数据集无法评估")
    correct = 0
    for start in range(0, len(dataset), EVAL_BATCH):
        stop = start + EVAL_BATCH
        correct += int(np.sum(predict(model, dataset.images[start:stop]) == dataset.labels[start:stop]))
    return correct / len(dataset)


def analyze_psi0(psi0: np.ndarray) -> tuple[SymmetryReport, float]:
    """Ψ⁰ 的旋转对称相关，以及高斯拟合的相关系数（拟合失败记为 nan）"""
    symmetry = symmetrize(psi0)
    try:
        _, corr = fit_gaussian(psi0)
    except FitFailureError as e:
        logger.warning(f"Ψ⁰ 高斯拟合失败: {e}")
        corr = math.nan
    return symmetry, corr


def train(
    model: ToyModel,
    dataset: BinaryDataset,
    cfg: TrainConfig,
    test: BinaryDataset | None = None,
    *,
    analyze: bool = True,
) -> TrainReport:
    """带动量的小批量 SGD，原地更新 model；L2 只加在权重上，不含偏置"""
    if len(dataset) == 0:
        raise ArgumentError("训练集为空")
    data = augment(dataset, cfg.augmentation, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    velocity = [np.zeros_like(model.psi0), 0.0, np.zeros_like(model.fc_weights), np.zeros_like(model.fc_bias)]
    loss_curve: list[float] = []
    lr_curve: list[float] = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        order = rng.permutation(len(data))
        total = 0.0
        for batch_index, start in enumerate(range(0, len(data), cfg.batch_size)):
            indices = order[start : start + cfg.batch_size]
            labels = data.labels[indices]
            logits, _, cache = forward(model, data.images[indices])
            batch_loss = float(np.sum(loss(logits, labels)))
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(epoch=epoch, batch=batch_index, loss=batch_loss)
            total += batch_loss

            grads = backward(model, cache, labels).scaled(1.0 / len(indices))
            velocity[0] = cfg.momentum * velocity[0] - lr * (grads.psi0 + cfg.l2 * model.psi0)
            velocity[1] = cfg.momentum * velocity[1] - lr * grads.conv_bias
            velocity[2] = cfg.momentum * velocity[2] - lr * (grads.fc_weights + cfg.l2 * model.fc_weights)
            velocity[3] = cfg.momentum * velocity[3] - lr * grads.fc_bias
            model.psi0 += velocity[0]
            model.conv_bias += velocity[1]
            model.fc_weights += velocity[2]
            model.fc_bias += velocity[3]

        epoch_loss = total / len(data)
        loss_curve.append(epoch_loss)
        lr_curve.append(lr)
        logger.info(f"epoch {epoch + 1}/{cfg.epochs}: loss={epoch_loss:.5f} lr={lr:.5g}")

    accuracy = evaluate(model, test if test is not None else dataset)
    logger.info(f"训练完成，准确率 {accuracy:.4f}")
    report = TrainReport(final_test_accuracy=accuracy, loss_curve=loss_curve, lr_curve=lr_curve)
    if analyze:
        report.psi0_symmetry, report.gaussian_fit_corr = analyze_psi0(model.psi0)
    return report


def save_loss_curve(path: str | Path, report: TrainReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss", "lr"])
        for epoch, (value, lr) in enumerate(zip(report.loss_curve, report.lr_curve), start=1):
            writer.writerow([epoch, repr(value), repr(lr)])
