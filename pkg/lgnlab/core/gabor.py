"""Gabor 拟合与 Ringach (n_x, n_y) 统计。

坐标约定：x 为列偏移、y 为行偏移，都以网格中心为原点；x0、y0 同样是相对中心的偏移。
    x′ =  (x − x0)·cosθ + (y − y0)·sinθ
    y′ = −(x − x0)·sinθ + (y − y0)·cosθ
    h  = A·exp(−x′²/(2σx²) − y′²/(2σy²))·cos(2πf·x′ + φ)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize

from .errors import ArgumentError, DimensionError, FitFailureError
from .image_ops import Kernel, as_kernel, corr2, kernel_convolve
from .kernels import offsets
from .log import logger
from .parallel import ordered_map

START_THETAS = tuple(k * math.pi / 8 for k in range(8))
START_FREQUENCIES = (0.05, 0.1, 0.2)
JACOBIAN_STEP = 1e-5
MAX_EVALUATIONS = 800
# 相对残差低于此值即视为精确拟合，不再尝试剩余起点
EXACT_FIT_TOLERANCE = 1e-20


@dataclass(slots=True, frozen=True)
class GaborParams:
    amplitude: float
    x0: float
    y0: float
    theta: float
    sigma_x: float
    sigma_y: float
    f: float
    phi: float

    def __post_init__(self) -> None:
        if not (self.sigma_x > 0.0 and self.sigma_y > 0.0):
            raise ArgumentError(f"sigma 必须为正数: σx={self.sigma_x} σy={self.sigma_y}")


@dataclass(slots=True, frozen=True)
class RingachPoint:
    n_x: float
    n_y: float


@dataclass(slots=True, frozen=True)
class PiecewiseFit:
    alpha: float
    breakpoint: tuple[float, float]
    slope2: float
    sse: float


@dataclass(slots=True)
class FilterBank:
    filters: list[Kernel] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.filters:
            raise ArgumentError("滤波器组为空")
        self.filters = [as_kernel(k) for k in self.filters]
        shape = self.filters[0].shape
        for index, kernel in enumerate(self.filters):
            if kernel.shape != shape:
                raise DimensionError(f"第 {index} 个滤波器形状 {kernel.shape} 与 {shape} 不一致")

    @property
    def side(self) -> int:
        return self.filters[0].shape[0]

    def __len__(self) -> int:
        return len(self.filters)


def _wrap_phase(phi: float) -> float:
    """折到 (−π, π]"""
    return math.pi - ((math.pi - phi) % (2.0 * math.pi))


def canonicalize(p: GaborParams) -> GaborParams:
    """消去 (A→−A, φ→φ+π)、(f→−f, φ→−φ)、(θ→θ+π, φ→−φ) 三个规范自由度"""
    amplitude, theta, f, phi = p.amplitude, p.theta, p.f, p.phi
    if amplitude < 0.0:
        amplitude, phi = -amplitude, phi + math.pi
    if f < 0.0:
        f, phi = -f, -phi
    turns = math.floor(theta / math.pi)
    theta -= turns * math.pi
    if theta >= math.pi:
        theta, turns = theta - math.pi, turns + 1
    if turns % 2:
        phi = -phi
    return replace(p, amplitude=amplitude, theta=theta, f=f, phi=_wrap_phase(phi))


def _evaluate(z: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    amplitude, x0, y0, theta, log_sx, log_sy, f, phi = z
    dx = x - x0
    dy = y - y0
    c, s = math.cos(theta), math.sin(theta)
    xr = dx * c + dy * s
    yr = -dx * s + dy * c
    sx2 = math.exp(2.0 * log_sx)
    sy2 = math.exp(2.0 * log_sy)
    envelope = np.exp(-xr * xr / (2.0 * sx2) - yr * yr / (2.0 * sy2))
    return amplitude * envelope * np.cos(2.0 * math.pi * f * xr + phi)


def _to_vector(p: GaborParams) -> np.ndarray:
    return np.array(
        [p.amplitude, p.x0, p.y0, p.theta, math.log(p.sigma_x), math.log(p.sigma_y), p.f, p.phi]
    )


def _from_vector(z: np.ndarray) -> GaborParams:
    amplitude, x0, y0, theta, log_sx, log_sy, f, phi = (float(v) for v in z)
    return GaborParams(
        amplitude=amplitude,
        x0=x0,
        y0=y0,
        theta=theta,
        sigma_x=math.exp(log_sx),
        sigma_y=math.exp(log_sy),
        f=f,
        phi=phi,
    )


def gabor_eval(p: GaborParams, side: int) -> Kernel:
    if side < 1 or side % 2 == 0:
        raise ArgumentError(f"边长必须是正奇数，实际 {side}")
    y, x = offsets(side)
    return _evaluate(_to_vector(p), x, y)


def _project_amplitude_phase(
    kernel: np.ndarray, x: np.ndarray, y: np.ndarray, theta: float, sigma: float, f: float
) -> tuple[float, float]:
    """固定形状时 A·cos(ωx′+φ) = a·cos(ωx′) − b·sin(ωx′) 是线性的，2×2 最小二乘求 (A, φ)"""
    c, s = math.cos(theta), math.sin(theta)
    xr = x * c + y * s
    yr = -x * s + y * c
    envelope = np.exp(-(xr * xr + yr * yr) / (2.0 * sigma * sigma))
    omega = 2.0 * math.pi * f * xr
    basis = np.stack([(envelope * np.cos(omega)).ravel(), (-envelope * np.sin(omega)).ravel()], axis=1)
    (a, b), *_ = np.linalg.lstsq(basis, kernel.ravel(), rcond=None)
    return float(math.hypot(a, b)), float(math.atan2(b, a))


def _start_grid(kernel: np.ndarray, x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    side = kernel.shape[0]
    sigma = max(side / 5.0, 0.5)
    starts: list[np.ndarray] = []
    combos = [(theta, f) for theta in START_THETAS for f in START_FREQUENCIES]
    combos.append((0.0, 0.0))
    for theta, f in combos:
        amplitude, phi = _project_amplitude_phase(kernel, x, y, theta, sigma, f)
        starts.append(
            np.array([amplitude, 0.0, 0.0, theta, math.log(sigma), math.log(sigma), f, phi])
        )
    return starts


def _central_jacobian(residual, z: np.ndarray) -> np.ndarray:
    columns = []
    for i in range(z.size):
        step = np.zeros_like(z)
        step[i] = JACOBIAN_STEP
        columns.append((residual(z + step) - residual(z - step)) / (2.0 * JACOBIAN_STEP))
    return np.stack(columns, axis=1)


def fit_gabor(kernel: ArrayLike) -> tuple[GaborParams, float]:
    """多起点 Levenberg–Marquardt 最小化 Σ(k − h)²；起点按初始残差排序，结果确定"""
    kernel = as_kernel(kernel)
    if np.ptp(kernel) == 0.0:
        raise ArgumentError("常数核无法拟合 Gabor")
    y, x = offsets(kernel.shape[0])
    target = kernel.ravel()
    scale = float(np.sum(target * target))

    def residual(z: np.ndarray) -> np.ndarray:
        return _evaluate(z, x, y).ravel() - target

    starts = _start_grid(kernel, x, y)
    initial_sse = [float(np.sum(residual(z) ** 2)) for z in starts]
    order = np.argsort(initial_sse, kind="stable")

    best_z: np.ndarray | None = None
    best_sse = math.inf
    for index in order:
        try:
            result = optimize.least_squares(
                residual,
                starts[index],
                jac=lambda z: _central_jacobian(residual, z),
                method="lm",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=MAX_EVALUATIONS,
            )
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.debug(f"Gabor 起点 {index} 拟合失败: {e}")
            continue
        if not np.all(np.isfinite(result.x)):
            continue
        sse = float(np.sum(result.fun**2))
        if sse < best_sse:
            best_sse, best_z = sse, result.x
        if best_sse <= EXACT_FIT_TOLERANCE * scale:
            break

    if best_z is None:
        raise FitFailureError("所有起点的 Gabor 拟合都失败", best_residual=min(initial_sse))
    params = canonicalize(_from_vector(best_z))
    corr = corr2(kernel, gabor_eval(params, kernel.shape[0]))
    return params, corr


def fit_bank(bank: FilterBank, threads: int = 0) -> list[tuple[GaborParams, float]]:
    fits = ordered_map(fit_gabor, bank.filters, threads)
    mean_corr = float(np.mean([corr for _, corr in fits]))
    logger.info(f"滤波器组拟合完成: {len(fits)} 个，平均相关 {mean_corr:.4f}")
    return fits


def effective_bank(psi0: ArrayLike, bank: FilterBank) -> FilterBank:
    """Ψ⁰ 与每个滤波器的卷积，截断到滤波器边长"""
    psi0 = as_kernel(psi0)
    return FilterBank([kernel_convolve(psi0, k, bank.side) for k in bank.filters])


def ringach_point(p: GaborParams) -> RingachPoint:
    f = abs(p.f)
    return RingachPoint(n_x=p.sigma_x * f, n_y=p.sigma_y * f)


def _origin_slope(x: np.ndarray, y: np.ndarray) -> float:
    denominator = float(np.dot(x, x))
    return 0.0 if denominator == 0.0 else float(np.dot(x, y)) / denominator


def fit_ringach_lines(points: Sequence[RingachPoint]) -> PiecewiseFit:
    """先用过原点直线 y=αx 拟合低段，再从其终点出发用第二条直线拟合其余点；遍历所有分割"""
    if len(points) < 4:
        raise ArgumentError(f"至少需要 4 个点，实际 {len(points)}")
    xs = np.array([p.n_x for p in points], dtype=np.float64)
    ys = np.array([p.n_y for p in points], dtype=np.float64)
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]

    best: PiecewiseFit | None = None
    for split in range(1, len(xs) + 1):
        lower_x, lower_y = xs[:split], ys[:split]
        alpha = _origin_slope(lower_x, lower_y)
        sse = float(np.sum((lower_y - alpha * lower_x) ** 2))
        x_b = float(lower_x[-1])
        y_b = alpha * x_b
        slope2 = alpha
        if split < len(xs):
            dx = xs[split:] - x_b
            dy = ys[split:] - y_b
            slope2 = _origin_slope(dx, dy)
            sse += float(np.sum((dy - slope2 * dx) ** 2))
        if best is None or sse < best.sse:
            best = PiecewiseFit(alpha=alpha, breakpoint=(x_b, y_b), slope2=slope2, sse=sse)
    assert best is not None
    return best


def save_scatter_csv(path: str | Path, fits: Sequence[tuple[GaborParams, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["filter_index", "n_x", "n_y", "corr", "theta", "f", "sigma_x", "sigma_y"])
        for index, (params, corr) in enumerate(fits):
            point = ringach_point(params)
            writer.writerow(
                [
                    index,
                    repr(point.n_x),
                    repr(point.n_y),
                    repr(corr),
                    repr(params.theta),
                    repr(params.f),
                    repr(params.sigma_x),
                    repr(params.sigma_y),
                ]
            )
