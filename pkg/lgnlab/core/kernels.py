from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize

from .errors import ArgumentError, FitFailureError
from .image_ops import (
    Interpolation,
    Kernel,
    as_kernel,
    corr2,
    normalize_zero_mean_unit_l2,
    resize,
    rotate,
)
from .log import logger
from .parallel import ordered_map

SYMMETRIZE_SCALE = 3
SYMMETRIZE_ANGLES = tuple(range(1, 361))
GAUSSIAN_FIT_STARTS = 32
GAUSSIAN_FIT_MIN_SIGMA = 0.2


@dataclass(slots=True, frozen=True)
class GaussianParams:
    alpha: float
    sigma: float


@dataclass(slots=True)
class SymmetryReport:
    symmetrized: Kernel
    correlation: float


@dataclass(slots=True)
class SweepRow:
    label: str
    psi_s_corr: float
    log_corr: float
    log_sigma: float


def _check_side(side: int) -> int:
    side = int(side)
    if side < 1 or side % 2 == 0:
        raise ArgumentError(f"核边长必须是正奇数，实际 {side}")
    return side


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0.0:
        raise ArgumentError(f"sigma 必须为正数，实际 {sigma}")
    return sigma


def offsets(side: int) -> tuple[np.ndarray, np.ndarray]:
    """以中心为原点的整数偏移 (y, x)"""
    half = (side - 1) // 2
    axis = np.arange(-half, half + 1, dtype=np.float64)
    return np.meshgrid(axis, axis, indexing="ij")


def _radius_squared(side: int) -> np.ndarray:
    y, x = offsets(side)
    return x * x + y * y


def gaussian_kernel(side: int, sigma: float, alpha: float = 1.0) -> Kernel:
    """α·exp(−(x²+y²)/(2σ²))，严格二面体 8 对称"""
    side = _check_side(side)
    sigma = _check_sigma(sigma)
    return float(alpha) * np.exp(-_radius_squared(side) / (2.0 * sigma * sigma))


def log_kernel(side: int, sigma: float, minus: bool = False, *, shift: bool = True) -> Kernel:
    """采样 ΔG_σ；minus=True 取负号；shift 后各项和严格为 0"""
    side = _check_side(side)
    sigma = _check_sigma(sigma)
    r2 = _radius_squared(side)
    s2 = sigma * sigma
    values = (r2 - 2.0 * s2) / (2.0 * np.pi * s2**3) * np.exp(-r2 / (2.0 * s2))
    if minus:
        values = -values
    if shift:
        # 截断后的采样和不为 0，整体平移使其消去常数
        values = values - values.mean()
    return values


def discrete_laplacian() -> Kernel:
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [1.0, -4.0, 1.0],
            [0.0, 1.0, 0.0],
        ]
    )


def delta_kernel(side: int) -> Kernel:
    side = _check_side(side)
    kernel = np.zeros((side, side))
    kernel[side // 2, side // 2] = 1.0
    return kernel


def symmetrize(kernel: ArrayLike, threads: int = 0) -> SymmetryReport:
    """放大 3 倍（双线性）→ 1°…360° 旋转求和 → 缩小 1/3（最近邻）→ 零均值单位 L2"""
    kernel = as_kernel(kernel)
    normalized = normalize_zero_mean_unit_l2(kernel)
    enlarged = resize(kernel, SYMMETRIZE_SCALE, Interpolation.BILINEAR)

    rotations = ordered_map(
        lambda angle: rotate(enlarged, angle, Interpolation.BILINEAR, 0.0),
        SYMMETRIZE_ANGLES,
        threads,
    )
    total = np.zeros_like(enlarged)
    for rotated in rotations:
        total += rotated

    reduced = resize(total, 1.0 / SYMMETRIZE_SCALE, Interpolation.NEAREST)
    if reduced.shape != kernel.shape:
        raise ArgumentError(f"对称化尺寸不一致: {reduced.shape} vs {kernel.shape}")
    symmetrized = normalize_zero_mean_unit_l2(reduced)
    correlation = corr2(normalized, symmetrized)
    logger.debug(f"对称化完成: side={kernel.shape[0]} corr={correlation:.4f}")
    return SymmetryReport(symmetrized=symmetrized, correlation=correlation)


def _gaussian_residual(kernel: np.ndarray, r2: np.ndarray, sigma: float) -> tuple[float, float]:
    """固定 σ 时 α 有闭式解，返回 (sse, alpha)"""
    g = np.exp(-r2 / (2.0 * sigma * sigma))
    alpha = float(np.sum(kernel * g) / np.sum(g * g))
    residual = kernel - alpha * g
    return float(np.sum(residual * residual)), alpha


def fit_gaussian(kernel: ArrayLike) -> tuple[GaussianParams, float]:
    """最小二乘拟合 α·exp(−r²/2σ²)：对数网格上 32 个起点，局部极小处做有界 Brent 搜索"""
    kernel = as_kernel(kernel)
    if np.ptp(kernel) == 0.0:
        raise ArgumentError("常数核无法拟合高斯")
    side = kernel.shape[0]
    r2 = _radius_squared(side)
    lo_bound = GAUSSIAN_FIT_MIN_SIGMA
    hi_bound = float(max(side, 1))
    grid = np.geomspace(lo_bound, hi_bound, GAUSSIAN_FIT_STARTS)
    grid_sse = np.array([_gaussian_residual(kernel, r2, s)[0] for s in grid])

    starts = [
        i
        for i in range(len(grid))
        if grid_sse[i] <= grid_sse[max(i - 1, 0)] and grid_sse[i] <= grid_sse[min(i + 1, len(grid) - 1)]
    ]
    best: tuple[float, float, float] | None = None
    for i in starts:
        left = grid[max(i - 1, 0)]
        right = grid[min(i + 1, len(grid) - 1)]
        result = optimize.minimize_scalar(
            lambda s: _gaussian_residual(kernel, r2, s)[0],
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-12},
        )
        sigma = float(result.x)
        sse, alpha = _gaussian_residual(kernel, r2, sigma)
        at_bound = np.isclose(sigma, lo_bound, rtol=1e-6) or np.isclose(sigma, hi_bound, rtol=1e-6)
        if at_bound:
            logger.debug(f"高斯拟合起点 {grid[i]:.3f} 收敛到边界 σ={sigma:.3f}")
            continue
        if best is None or sse < best[0]:
            best = (sse, alpha, sigma)

    if best is None:
        raise FitFailureError("所有起点的 σ 都被推到边界", best_residual=float(grid_sse.min()))
    _, alpha, sigma = best
    params = GaussianParams(alpha=alpha, sigma=sigma)
    corr = corr2(kernel, gaussian_kernel(side, sigma, alpha))
    return params, corr


def fit_log(kernel: ArrayLike, sigmas: Iterable[float] | None = None) -> tuple[float, float]:
    """网格搜索使 corr2(k, −LoG_σ) 最大的 σ，返回 (σ*, corr)"""
    kernel = as_kernel(kernel)
    side = kernel.shape[0]
    if sigmas is None:
        sigmas = np.linspace(0.3, max(side / 2.0, 0.6), 400)
    best_sigma, best_corr = float("nan"), -np.inf
    for sigma in sigmas:
        corr = corr2(kernel, log_kernel(side, float(sigma), minus=True))
        if corr > best_corr:
            best_sigma, best_corr = float(sigma), corr
    return best_sigma, float(best_corr)


def radial_profile(kernel: ArrayLike, radii: Sequence[int] | None = None) -> np.ndarray:
    """中心行向右的切片，即逆算子剖面图所用的一维截面"""
    kernel = as_kernel(kernel)
    center = kernel.shape[0] // 2
    if radii is None:
        radii = range(center + 1)
    radii = np.asarray(list(radii), dtype=int)
    if radii.size and (radii.min() < 0 or radii.max() > center):
        raise ArgumentError(f"半径超出核范围 0..{center}")
    return kernel[center, center + radii].copy()


def symmetry_sweep(kernels: Sequence[tuple[str, ArrayLike]], threads: int = 0) -> list[SweepRow]:
    rows: list[SweepRow] = []
    for label, kernel in kernels:
        report = symmetrize(kernel, threads=threads)
        log_sigma, log_corr = fit_log(kernel)
        rows.append(
            SweepRow(
                label=label,
                psi_s_corr=report.correlation,
                log_corr=log_corr,
                log_sigma=log_sigma,
            )
        )
        logger.info(
            f"{label}: Ψ_S 相关 {report.correlation:.4f}，LoG 相关 {log_corr:.4f} (σ={log_sigma:.3f})"
        )
    return rows
