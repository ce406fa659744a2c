from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ArgumentError, DimensionError
from .image_ops import Interpolation, circular_mask, rotate
from .log import logger

DIGIT_LABEL = 0
CLOTH_LABEL = 1
STANDARD_TRAIN_SIZE = 60000
STANDARD_TEST_SIZE = 10000


class Augmentation(str, Enum):
    NONE = "none"
    MILD = "mild"
    HARD = "hard"

    @classmethod
    def parse(cls, value: "str | Augmentation") -> "Augmentation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ArgumentError(f"未知的增强方式: {value}（可选 none / mild / hard）")


@dataclass(slots=True)
class BinaryDataset:
    """28×28 灰度图与 0/1 标签（0 = 数字，1 = 服饰）"""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise DimensionError(f"图像张量必须是 (N, rows, cols)，实际 {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ArgumentError(f"图像数 {len(self.images)} 与标签数 {len(self.labels)} 不一致")
        if self.labels.size and not np.isin(self.labels, (DIGIT_LABEL, CLOTH_LABEL)).all():
            raise ArgumentError("标签只能是 0 或 1")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices: np.ndarray) -> "BinaryDataset":
        return BinaryDataset(self.images[indices], self.labels[indices])


def _merge_halves(digits: np.ndarray, clothes: np.ndarray, expected: int, split: str) -> BinaryDataset:
    digits = np.asarray(digits, dtype=np.float64)
    clothes = np.asarray(clothes, dtype=np.float64)
    for name, images in (("MNIST", digits), ("Fashion-MNIST", clothes)):
        if len(images) < expected:
            raise ArgumentError(f"{name} {split} 集只有 {len(images)} 张，至少需要 {expected} 张")
    half = expected // 2
    images = np.concatenate([digits[:half], clothes[:half]])
    labels = np.concatenate(
        [np.full(half, DIGIT_LABEL, dtype=np.int64), np.full(half, CLOTH_LABEL, dtype=np.int64)]
    )
    return BinaryDataset(images, labels)


def build_binary_dataset(
    mnist_train: np.ndarray,
    fashion_train: np.ndarray,
    mnist_test: np.ndarray,
    fashion_test: np.ndarray,
    seed: int = 0,
    *,
    train_size: int = STANDARD_TRAIN_SIZE,
    test_size: int = STANDARD_TEST_SIZE,
) -> tuple[BinaryDataset, BinaryDataset]:
    """各取前一半拼接、打 0/1 标签，再用 seed 固定打乱顺序"""
    if train_size < 2 or test_size < 2:
        raise ArgumentError(f"数据集规模过小: train={train_size} test={test_size}")
    train = _merge_halves(mnist_train, fashion_train, train_size, "训练")
    test = _merge_halves(mnist_test, fashion_test, test_size, "测试")
    rng = np.random.default_rng(seed)
    train = train.subset(rng.permutation(len(train)))
    test = test.subset(rng.permutation(len(test)))
    logger.info(f"二分类数据集构建完成: 训练 {len(train)} 张，测试 {len(test)} 张")
    return train, test


def augment(dataset: BinaryDataset, mode: Augmentation | str, seed: int = 0) -> BinaryDataset:
    mode = Augmentation.parse(mode)
    if mode is Augmentation.NONE:
        return dataset
    rng = np.random.default_rng(seed)
    if mode is Augmentation.MILD:
        turns = rng.integers(0, 4, size=len(dataset))
        images = np.stack([np.rot90(image, int(k)) for image, k in zip(dataset.images, turns)])
    else:
        angles = rng.integers(0, 360, size=len(dataset))
        images = np.stack(
            [
                rotate(circular_mask(image), float(angle), Interpolation.BILINEAR, 0.0)
                for image, angle in zip(dataset.images, angles)
            ]
        )
    logger.debug(f"数据增强 {mode.value}: {len(dataset)} 张")
    return BinaryDataset(images, dataset.labels.copy())
