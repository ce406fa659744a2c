"""逆卷积核 M̃ 的迭代求解。

两种迭代：
    richardson     M̃ ← M̃ + dt·(M∗M̃ − δ)
    least-squares  最小化 ½‖M∗M̃ − δ‖²
        gradient   M̃ ← M̃ − dt·M^♭∗(M∗M̃ − δ)，固定步长最速下降
        cg         正规方程 M^♭∗M∗M̃ = M^♭∗δ 上的共轭梯度（默认）

所有核卷积都截断在 support_side × support_side 网格上（零填充）。
停止条件、更新量轨迹和发散判据都按 M̃ 本身的单位计算，与 prescale 无关。
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy import signal
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ArgumentError, DimensionError, DivergenceError
from .image_ops import Kernel, as_kernel, flip_kernel
from .kernels import delta_kernel, radial_profile
from .log import logger

DIVERGENCE_LIMIT = 1e6
PROGRESS_EVERY = 2000
# cg 自身的残差阈值只用来挡住精确为 0 的残差，正常停止由 ε 判据负责
_CG_ATOL = float(np.finfo(np.float64).tiny)


class InverseMode(str, Enum):
    LEAST_SQUARES = "least-squares"
    RICHARDSON = "richardson"

    @classmethod
    def parse(cls, value: "str | InverseMode") -> "InverseMode":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        aliases = {
            "leastsquares": cls.LEAST_SQUARES,
            "ls": cls.LEAST_SQUARES,
        }
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError:
            raise ArgumentError(f"未知的迭代模式: {value}（可选 least-squares / richardson）")


class InverseSolver(str, Enum):
    CONJUGATE_GRADIENT = "cg"
    GRADIENT = "gradient"

    @classmethod
    def parse(cls, value: "str | InverseSolver") -> "InverseSolver":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        if text == "conjugate-gradient":
            return cls.CONJUGATE_GRADIENT
        try:
            return cls(text)
        except ValueError:
            raise ArgumentError(f"未知的求解器: {value}（可选 cg / gradient）")


@dataclass(slots=True)
class InverseConfig:
    dt: float = 0.1
    epsilon: float = 1e-6
    max_iters: int = 20000
    support_side: int = 41
    mode: InverseMode = InverseMode.LEAST_SQUARES
    prescale: bool = True
    solver: InverseSolver = InverseSolver.CONJUGATE_GRADIENT

    def __post_init__(self) -> None:
        self.mode = InverseMode.parse(self.mode)
        self.solver = InverseSolver.parse(self.solver)
        self.dt = float(self.dt)
        self.epsilon = float(self.epsilon)
        if self.dt == 0.0 or not np.isfinite(self.dt):
            raise ArgumentError(f"dt 不能为 0，实际 {self.dt}")
        if not self.epsilon > 0.0:
            raise ArgumentError(f"epsilon 必须为正数，实际 {self.epsilon}")
        if int(self.max_iters) < 1:
            raise ArgumentError(f"max_iters 必须为正整数，实际 {self.max_iters}")
        if int(self.support_side) < 1 or int(self.support_side) % 2 == 0:
            raise ArgumentError(f"support_side 必须是正奇数，实际 {self.support_side}")
        self.max_iters = int(self.max_iters)
        self.support_side = int(self.support_side)

    @property
    def conjugate_gradient(self) -> bool:
        return self.mode is InverseMode.LEAST_SQUARES and self.solver is InverseSolver.CONJUGATE_GRADIENT


@dataclass(slots=True)
class InverseResult:
    m_tilde: Kernel
    residual_l1: float
    leak_l1: float
    iterations: int
    converged: bool
    residual_trace: list[float] = field(default_factory=list)
    update_trace: list[float] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)

    @property
    def full_residual_l1(self) -> float:
        """未截断的 ‖M∗M̃ − δ‖₁"""
        return self.residual_l1 + self.leak_l1


def _conv_same(kernel: np.ndarray, values: np.ndarray) -> np.ndarray:
    return signal.convolve2d(values, kernel, mode="same")


def stability_bound(kernel: ArrayLike, support_side: int) -> float:
    """gradient 求解器单调下降的 dt 上界 2/max|M̂|²（在 support 网格上估计）"""
    kernel = as_kernel(kernel)
    n = max(support_side, kernel.shape[0])
    symbol = np.abs(np.fft.fft2(kernel, s=(2 * n, 2 * n)))
    peak = float(symbol.max())
    return np.inf if peak == 0.0 else 2.0 / (peak * peak)


class _Stop(Exception):
    """由 cg 回调抛出，提前结束迭代"""


@dataclass(slots=True)
class _Progress:
    """逐次迭代的记录；x 是 prescale 后的变量，M̃ = x / scale"""

    kernel: np.ndarray
    delta: np.ndarray
    scale: float
    cfg: InverseConfig
    residual: np.ndarray = field(init=False)
    residual_trace: list[float] = field(default_factory=list)
    update_trace: list[float] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.residual = _conv_same(self.kernel, self.delta) - self.delta

    @property
    def iterations(self) -> int:
        return len(self.update_trace)

    def record(self, x: np.ndarray, step: np.ndarray) -> bool:
        """记一次迭代，返回是否满足 ‖M̃_{t+1} − M̃_t‖₁ / |dt| < ε"""
        iteration = self.iterations + 1
        update_l1 = float(np.abs(step).sum()) / self.scale
        if not np.isfinite(update_l1) or update_l1 > DIVERGENCE_LIMIT:
            raise DivergenceError(
                mode=self.cfg.mode.value, dt=self.cfg.dt, iteration=iteration, update_norm=update_l1
            )
        self.residual = _conv_same(self.kernel, x) - self.delta
        self.residual_trace.append(float(np.abs(self.residual).sum()))
        self.update_trace.append(update_l1)
        self.objective_trace.append(0.5 * float(np.sum(self.residual * self.residual)))

        rate = update_l1 / abs(self.cfg.dt)
        if iteration % PROGRESS_EVERY == 0:
            logger.debug(
                f"逆核迭代 {iteration}: residual_l1={self.residual_trace[-1]:.3e} update_l1/dt={rate:.3e}"
            )
        return rate < self.cfg.epsilon


def _fixed_step(progress: _Progress, flipped: np.ndarray, least_squares: bool) -> tuple[np.ndarray, bool]:
    cfg = progress.cfg
    x = progress.delta.copy()
    for _ in range(cfg.max_iters):
        if least_squares:
            step = -cfg.dt * _conv_same(flipped, progress.residual)
        else:
            step = cfg.dt * progress.residual
        x += step
        if progress.record(x, step):
            return x, True
    return x, False


def _conjugate_gradient(progress: _Progress, flipped: np.ndarray) -> tuple[np.ndarray, bool]:
    shape = progress.delta.shape
    size = progress.delta.size

    def normal(v: np.ndarray) -> np.ndarray:
        return _conv_same(flipped, _conv_same(progress.kernel, v.reshape(shape))).ravel()

    operator = LinearOperator((size, size), matvec=normal, rmatvec=normal, dtype=np.float64)
    rhs = _conv_same(flipped, progress.delta).ravel()
    x0 = progress.delta.ravel().copy()
    if not np.any(rhs - normal(x0)):
        # δ 已是最小二乘解
        return progress.delta.copy(), True

    previous = x0.copy()

    def on_iteration(xk: np.ndarray) -> None:
        nonlocal previous
        step = xk - previous
        previous = np.array(xk, copy=True)
        if progress.record(previous.reshape(shape), step.reshape(shape)):
            raise _Stop

    try:
        _, info = cg(
            operator,
            rhs,
            x0=x0,
            rtol=0.0,
            atol=_CG_ATOL,
            maxiter=progress.cfg.max_iters,
            callback=on_iteration,
        )
    except _Stop:
        return previous.reshape(shape), True
    # info == 0 只会在残差精确为 0 时出现
    return previous.reshape(shape), info == 0


def invert_kernel(m: ArrayLike, cfg: InverseConfig) -> InverseResult:
    m = as_kernel(m)
    n = cfg.support_side
    if m.shape[0] > n:
        raise DimensionError(f"support_side={n} 小于核边长 {m.shape[0]}")

    least_squares = cfg.mode is InverseMode.LEAST_SQUARES
    scale = 1.0
    if least_squares and cfg.prescale:
        norm = float(np.linalg.norm(m))
        if norm == 0.0:
            raise ArgumentError("零核无法求逆")
        scale = norm
    kernel = m / scale
    flipped = flip_kernel(kernel)

    if least_squares and not cfg.conjugate_gradient:
        bound = stability_bound(kernel, n)
        if abs(cfg.dt) >= bound:
            logger.warning(f"dt={cfg.dt:g} 超过 least-squares 稳定上界 {bound:.4g}，可能发散")

    progress = _Progress(kernel=kernel, delta=delta_kernel(n), scale=scale, cfg=cfg)
    if cfg.conjugate_gradient:
        x, converged = _conjugate_gradient(progress, flipped)
    else:
        x, converged = _fixed_step(progress, flipped, least_squares)
    iterations = progress.iterations

    m_tilde = x / scale
    full = signal.convolve2d(m, m_tilde, mode="full")
    full_l1 = float(np.abs(full).sum())
    inside_l1 = float(np.abs(_conv_same(m, m_tilde)).sum())
    leak_l1 = max(0.0, full_l1 - inside_l1)

    residual_l1 = float(np.abs(_conv_same(m, m_tilde) - progress.delta).sum())
    label = f"{cfg.mode.value}/{cfg.solver.value}" if least_squares else cfg.mode.value
    if converged:
        logger.info(f"逆核迭代收敛: mode={label} 迭代 {iterations} 次，residual_l1={residual_l1:.3e}")
    else:
        logger.warning(
            f"逆核迭代在 max_iters={cfg.max_iters} 内未收敛，residual_l1={residual_l1:.3e}"
        )
    return InverseResult(
        m_tilde=m_tilde,
        residual_l1=residual_l1,
        leak_l1=leak_l1,
        iterations=iterations,
        converged=converged,
        residual_trace=progress.residual_trace,
        update_trace=progress.update_trace,
        objective_trace=progress.objective_trace,
    )


def save_residual_csv(path: str | Path, result: InverseResult) -> None:
    """每次迭代一行；objective 是 ½‖M∗M̃ − δ‖₂²，least-squares 模式下单调不增，L1 列不保证单调"""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "residual_l1", "update_l1", "objective"])
        for index, (residual, update, objective) in enumerate(
            zip(result.residual_trace, result.update_trace, result.objective_trace), start=1
        ):
            writer.writerow([index, repr(residual), repr(update), repr(objective)])


def save_slice_csv(path: str | Path, m_tilde: ArrayLike) -> None:
    """逆核中心行向右的剖面，附 log r 便于与 Green 函数比较"""
    profile = radial_profile(m_tilde)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["r", "value", "log_r"])
        for r, value in enumerate(profile):
            log_r = repr(float(np.log(r))) if r > 0 else ""
            writer.writerow([r, repr(float(value)), log_r])
