"""二维数组运算：卷积、旋转、缩放、相关系数、熵。

所有函数都是输入的纯函数，返回新数组，不修改入参。
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage, signal, stats

from .errors import (
    ArgumentError,
    DegenerateNormalizationError,
    DimensionError,
    UndefinedCorrelationError,
)

Image = NDArray[np.float64]
Kernel = NDArray[np.float64]

ENTROPY_BINS = 256
# 缩放时 ⌈scale·dim⌉ 的浮点容差，避免 39·(1/3) 这类乘积向上多取一格
_CEIL_TOLERANCE = 1e-9


class PaddingMode(str, Enum):
    ZERO = "zero"
    REPLICATE = "replicate"

    @classmethod
    def parse(cls, value: "str | PaddingMode") -> "PaddingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ArgumentError(f"未知的边界模式: {value}")


class Interpolation(str, Enum):
    BILINEAR = "bilinear"
    NEAREST = "nearest"

    @classmethod
    def parse(cls, value: "str | Interpolation") -> "Interpolation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ArgumentError(f"未知的插值方法: {value}")

    @property
    def order(self) -> int:
        return 1 if self is Interpolation.BILINEAR else 0


_NDIMAGE_MODE = {
    PaddingMode.ZERO: "constant",
    PaddingMode.REPLICATE: "nearest",
}


def as_image(values: ArrayLike) -> Image:
    array = np.array(values, dtype=np.float64)
    if array.ndim != 2 or array.size == 0:
        raise DimensionError(f"图像必须是非空二维数组，实际形状 {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ArgumentError("图像包含 NaN 或 Inf")
    return array


def as_kernel(values: ArrayLike) -> Kernel:
    array = as_image(values)
    rows, cols = array.shape
    if rows != cols or rows % 2 == 0:
        raise DimensionError(f"卷积核必须是奇数边长的方阵，实际形状 {array.shape}")
    return array


def center_window(values: np.ndarray, side: int) -> np.ndarray:
    """取中心 side×side 窗口；side 超出时四周补零。两者奇偶相同。"""
    n = values.shape[0]
    if side <= n:
        offset = (n - side) // 2
        return values[offset : offset + side, offset : offset + side].copy()
    pad = (side - n) // 2
    return np.pad(values, pad)


def convolve_same(
    image: ArrayLike,
    kernel: ArrayLike,
    pad: PaddingMode | str = PaddingMode.ZERO,
) -> Image:
    """同尺寸真卷积（核翻转）"""
    image = as_image(image)
    kernel = as_kernel(kernel)
    pad = PaddingMode.parse(pad)
    if kernel.shape[0] > min(image.shape):
        raise DimensionError(
            f"卷积核边长 {kernel.shape[0]} 大于图像尺寸 {image.shape}"
        )
    return ndimage.convolve(image, kernel, mode=_NDIMAGE_MODE[pad], cval=0.0)


def kernel_convolve(a: ArrayLike, b: ArrayLike, out_side: int) -> Kernel:
    """核与核的完整离散卷积，取中心 out_side×out_side"""
    if out_side < 1 or out_side % 2 == 0:
        raise ArgumentError(f"out_side 必须是正奇数，实际 {out_side}")
    a = as_kernel(a)
    b = as_kernel(b)
    full = signal.convolve2d(a, b, mode="full")
    return center_window(full, out_side)


def flip_kernel(kernel: ArrayLike) -> Kernel:
    """旋转 180°，即 M^♭"""
    return np.ascontiguousarray(as_kernel(kernel)[::-1, ::-1])


def corr2(a: ArrayLike, b: ArrayLike) -> float:
    """两个同形数组的 Pearson 相关系数（逐元素）"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"corr2 形状不一致: {a.shape} vs {b.shape}")
    if a.size == 0 or np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise UndefinedCorrelationError("常数输入的相关系数无定义")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.sum(da * da))
    sbb = float(np.sum(db * db))
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedCorrelationError("输入方差下溢为 0，相关系数无定义")
    value = float(np.sum(da * db)) / math.sqrt(saa * sbb)
    return float(np.clip(value, -1.0, 1.0))


def rotate(
    image: ArrayLike,
    degrees: float,
    method: Interpolation | str = Interpolation.BILINEAR,
    fill: float = 0.0,
) -> Image:
    """绕网格中心逆时针旋转，输出尺寸与输入相同（crop 约定），越界处取 fill"""
    image = as_image(image)
    method = Interpolation.parse(method)
    angle = float(degrees) % 360.0
    if angle == 0.0:
        return image.copy()
    rows, cols = image.shape
    if rows == cols and angle % 90.0 == 0.0:
        return np.ascontiguousarray(np.rot90(image, k=int(angle // 90.0)))
    return ndimage.rotate(
        image,
        angle,
        reshape=False,
        order=method.order,
        mode="constant",
        cval=float(fill),
        prefilter=False,
    )


def resized_shape(shape: tuple[int, int], scale: float) -> tuple[int, int]:
    rows, cols = shape
    return (
        int(math.ceil(scale * rows - _CEIL_TOLERANCE)),
        int(math.ceil(scale * cols - _CEIL_TOLERANCE)),
    )


def resize(
    image: ArrayLike,
    scale: float,
    method: Interpolation | str = Interpolation.BILINEAR,
) -> Image:
    """按像素中心对齐的网格重采样，输出尺寸 ⌈scale·dim⌉"""
    image = as_image(image)
    method = Interpolation.parse(method)
    scale = float(scale)
    if not scale > 0.0 or not math.isfinite(scale):
        raise ArgumentError(f"缩放比例必须为正数，实际 {scale}")
    if scale == 1.0:
        return image.copy()
    out_rows, out_cols = resized_shape(image.shape, scale)
    if out_rows < 1 or out_cols < 1:
        raise ArgumentError(f"缩放后尺寸为空: {(out_rows, out_cols)}")
    r = (np.arange(out_rows) + 0.5) / scale - 0.5
    c = (np.arange(out_cols) + 0.5) / scale - 0.5
    rr, cc = np.meshgrid(r, c, indexing="ij")
    return ndimage.map_coordinates(
        image,
        [rr, cc],
        order=method.order,
        mode="nearest",
        prefilter=False,
    )


def normalize_zero_mean_unit_l2(kernel: ArrayLike) -> Kernel:
    kernel = np.array(kernel, dtype=np.float64)
    # 常数核按极差判断
    if kernel.size == 0 or np.ptp(kernel) == 0.0:
        raise DegenerateNormalizationError("常数核无法做零均值单位 L2 归一化")
    centered = kernel - kernel.mean()
    norm = float(np.linalg.norm(centered))
    if norm == 0.0:
        raise DegenerateNormalizationError("核的方差下溢为 0，无法归一化")
    return centered / norm


def entropy(image: ArrayLike) -> float:
    """灰度直方图的 Shannon 熵（bit），256 个 bin 覆盖图像自身的 [min, max]"""
    values = np.asarray(image, dtype=np.float64).ravel()
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return 0.0
    counts, _ = np.histogram(values, bins=ENTROPY_BINS, range=(lo, hi))
    return float(stats.entropy(counts, base=2))


def circular_mask(image: ArrayLike, radius: float | None = None, fill: float = 0.0) -> Image:
    """保留以网格中心为圆心的圆内像素，圆外置为 fill"""
    image = as_image(image)
    rows, cols = image.shape
    if radius is None:
        radius = min(rows, cols) / 2.0
    y, x = np.ogrid[:rows, :cols]
    dist2 = (y - (rows - 1) / 2.0) ** 2 + (x - (cols - 1) / 2.0) ** 2
    out = image.copy()
    out[dist2 > radius * radius] = fill
    return out


def center_crop(image: ArrayLike, rows: int, cols: int) -> Image:
    image = as_image(image)
    total_rows, total_cols = image.shape
    if rows > total_rows or cols > total_cols or rows < 1 or cols < 1:
        raise DimensionError(f"裁剪尺寸 {(rows, cols)} 超出图像 {image.shape}")
    top = (total_rows - rows) // 2
    left = (total_cols - cols) // 2
    return image[top : top + rows, left : left + cols].copy()


def zero_mean(image: ArrayLike) -> Image:
    image = as_image(image)
    return image - image.mean()
