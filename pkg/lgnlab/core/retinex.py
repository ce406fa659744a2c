from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import ArgumentError
from .image_ops import Image, PaddingMode, as_image, as_kernel, convolve_same, entropy
from .inverse import InverseConfig, InverseResult, invert_kernel
from .log import logger
from .parallel import ordered_map

Point = tuple[int, int]


class MeanPolicy(str, Enum):
    ZERO_MEAN = "zero-mean"
    MATCH_INPUT = "match-input"

    @classmethod
    def parse(cls, value: "str | MeanPolicy") -> "MeanPolicy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("_", "-"))
        except ValueError:
            raise ArgumentError(f"未知的均值策略: {value}（可选 zero-mean / match-input）")


@dataclass(slots=True)
class ProbeResult:
    label: str
    center: Point
    half_window: int
    before: float
    after: float


@dataclass(slots=True)
class RetinexReport:
    reconstruction: Image
    probes: list[ProbeResult] = field(default_factory=list)
    inverse: InverseResult | None = None


@dataclass(slots=True)
class EntropyReport:
    h_orig: float
    h_conv: float
    h_recon: float
    per_image: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def recovered_fraction(self) -> float:
        """重建收回的 (原图 − 卷积后) 熵差比例"""
        gap = self.h_orig - self.h_conv
        return float("nan") if gap == 0.0 else (self.h_recon - self.h_conv) / gap


def retinex_reconstruct(
    image: ArrayLike,
    m: ArrayLike,
    m_tilde: ArrayLike,
    mean_policy: MeanPolicy | str = MeanPolicy.MATCH_INPUT,
) -> Image:
    """Ĩ = M̃ ∗ (M ∗ I)，两次卷积都用复制边界"""
    image = as_image(image)
    policy = MeanPolicy.parse(mean_policy)
    filtered = convolve_same(image, as_kernel(m), PaddingMode.REPLICATE)
    reconstruction = convolve_same(filtered, as_kernel(m_tilde), PaddingMode.REPLICATE)
    if policy is MeanPolicy.ZERO_MEAN:
        return reconstruction - reconstruction.mean()
    return reconstruction + (image.mean() - reconstruction.mean())


def _check_point(shape: tuple[int, int], center: Point, margin: int, what: str) -> None:
    r, c = center
    rows, cols = shape
    if r - margin < 0 or c - margin < 0 or r + margin >= rows or c + margin >= cols:
        raise ArgumentError(f"{what} {center}（半径 {margin}）超出 {rows}x{cols} 网格")


def gradient_circles_image(
    rows: int,
    cols: int,
    dot_radius: int,
    left_center: Point,
    right_center: Point,
) -> Image:
    """水平线性渐变背景（1 → −1）上的两个 0 值圆点"""
    if rows < 1 or cols < 2:
        raise ArgumentError(f"图像尺寸无效: {rows}x{cols}")
    if dot_radius < 0:
        raise ArgumentError(f"圆点半径不能为负: {dot_radius}")
    for center in (left_center, right_center):
        _check_point((rows, cols), center, dot_radius, "圆点")
    distance = np.hypot(left_center[0] - right_center[0], left_center[1] - right_center[1])
    if distance <= 2 * dot_radius:
        raise ArgumentError(f"两个圆点重叠: 中心距 {distance:.2f} ≤ {2 * dot_radius}")

    column = 1.0 - 2.0 * np.arange(cols, dtype=np.float64) / (cols - 1)
    image = np.tile(column, (rows, 1))
    yy, xx = np.mgrid[0:rows, 0:cols]
    for r, c in (left_center, right_center):
        image[(yy - r) ** 2 + (xx - c) ** 2 <= dot_radius * dot_radius] = 0.0
    return image


def default_circle_centers(rows: int, cols: int) -> tuple[Point, Point]:
    """左右两个圆点关于竖直中线对称，各距边缘 cols/8"""
    offset = cols // 8
    return (rows // 2, offset), (rows // 2, cols - 1 - offset)


def shadowed_checker_image(rows: int, cols: int, patch: int) -> tuple[Image, Point, Point]:
    """同时对比刺激：左半亮背景 +0.5，右半暗背景 −0.5，两块相同的 0 灰块 A、B"""
    if patch < 1 or 2 * patch > cols // 2 or patch > rows:
        raise ArgumentError(f"灰块边长 {patch} 与图像尺寸 {rows}x{cols} 不匹配")
    image = np.full((rows, cols), 0.5)
    image[:, cols // 2 :] = -0.5
    a_center = (rows // 2, cols // 4)
    b_center = (rows // 2, cols // 2 + cols // 4)
    half = patch // 2
    for r, c in (a_center, b_center):
        image[r - half : r - half + patch, c - half : c - half + patch] = 0.0
    return image, a_center, b_center


def probe(image: ArrayLike, center: Point, half_window: int) -> float:
    image = as_image(image)
    if half_window < 0:
        raise ArgumentError(f"half_window 不能为负: {half_window}")
    _check_point(image.shape, center, half_window, "探测窗口")
    r, c = center
    h = half_window
    return float(image[r - h : r + h + 1, c - h : c + h + 1].mean())


def reconstruct_with_probes(
    image: ArrayLike,
    m: ArrayLike,
    cfg: InverseConfig,
    points: Sequence[tuple[str, Point]],
    *,
    half_window: int = 1,
    mean_policy: MeanPolicy | str = MeanPolicy.MATCH_INPUT,
) -> RetinexReport:
    """求逆核、重建，并在给定点上比较重建前后的窗口均值"""
    image = as_image(image)
    for label, center in points:
        _check_point(image.shape, center, half_window, f"探测点 {label}")
    inverse = invert_kernel(m, cfg)
    if not inverse.converged:
        logger.warning(f"逆核未收敛（residual_l1={inverse.residual_l1:.3e}），仍使用最后一次迭代结果")
    reconstruction = retinex_reconstruct(image, m, inverse.m_tilde, mean_policy)
    probes = [
        ProbeResult(
            label=label,
            center=center,
            half_window=half_window,
            before=probe(image, center, half_window),
            after=probe(reconstruction, center, half_window),
        )
        for label, center in points
    ]
    for item in probes:
        logger.info(f"探测点 {item.label}{item.center}: {item.before:.4f} → {item.after:.4f}")
    return RetinexReport(reconstruction=reconstruction, probes=probes, inverse=inverse)


def adelson_probe(
    image: ArrayLike,
    a_center: Point,
    b_center: Point,
    m: ArrayLike,
    cfg: InverseConfig,
    half_window: int = 1,
) -> RetinexReport:
    return reconstruct_with_probes(
        image,
        m,
        cfg,
        [("A", a_center), ("B", b_center)],
        half_window=half_window,
        mean_policy=MeanPolicy.MATCH_INPUT,
    )


def entropy_pipeline(
    images: Sequence[ArrayLike],
    m: ArrayLike,
    cfg: InverseConfig,
    threads: int = 0,
    m_tilde: ArrayLike | None = None,
) -> EntropyReport:
    """原图、M∗I、重建图三者的平均熵；逆核只求一次，图像间可并行"""
    if len(images) == 0:
        raise ArgumentError("图像列表为空")
    m = as_kernel(m)
    if m_tilde is None:
        m_tilde = invert_kernel(m, cfg).m_tilde
    m_tilde = as_kernel(m_tilde)

    def measure(image: ArrayLike) -> tuple[float, float, float]:
        image = as_image(image)
        convolved = convolve_same(image, m, PaddingMode.REPLICATE)
        reconstruction = retinex_reconstruct(image, m, m_tilde, MeanPolicy.MATCH_INPUT)
        return entropy(image), entropy(convolved), entropy(reconstruction)

    rows = ordered_map(measure, list(images), threads)
    h_orig, h_conv, h_recon = (float(np.mean(column)) for column in zip(*rows))
    logger.info(f"平均熵: 原图 {h_orig:.4f}，卷积后 {h_conv:.4f}，重建 {h_recon:.4f}（{len(rows)} 张）")
    return EntropyReport(h_orig=h_orig, h_conv=h_conv, h_recon=h_recon, per_image=rows)


def format_probe_report(report: RetinexReport) -> str:
    lines = ["label,before,after"]
    lines.extend(f"{p.label},{p.before!r},{p.after!r}" for p in report.probes)
    return "\n".join(lines) + "\n"


def save_probe_report(path: str | Path, report: RetinexReport) -> None:
    Path(path).write_text(format_probe_report(report), encoding="utf-8")
