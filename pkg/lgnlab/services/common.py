"""各子命令共用的参数与输出工具。"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any

import numpy as np

from ..clients.kmat_io import format_kmat, load_kmat, save_kmat
from ..core.config import LabConfig
from ..core.errors import ArgumentError
from ..core.image_ops import Kernel
from ..core.inverse import InverseConfig
from ..core.kernels import delta_kernel, discrete_laplacian, gaussian_kernel, log_kernel
from ..core.previews import save_preview

KERNEL_NAMES = ("gaussian", "log", "minus-log", "laplacian", "delta")


def build_kernel(name: str, side: int, sigma: float, alpha: float = 1.0) -> Kernel:
    """内置核名，或 KMAT 文件路径"""
    key = name.strip().lower()
    if key == "gaussian":
        return gaussian_kernel(side, sigma, alpha)
    if key == "log":
        return log_kernel(side, sigma)
    if key == "minus-log":
        return log_kernel(side, sigma, minus=True)
    if key == "laplacian":
        return discrete_laplacian()
    if key == "delta":
        return delta_kernel(side)
    path = Path(name)
    if not path.exists():
        raise ArgumentError(f"未知的核: {name}（可选 {' / '.join(KERNEL_NAMES)} 或 KMAT 文件路径）")
    return load_kmat(path, kernel=True)


def add_kernel_arguments(parser: argparse.ArgumentParser, default: str = "minus-log") -> None:
    parser.add_argument("--kernel", default=default, help=f"{' / '.join(KERNEL_NAMES)} 或 KMAT 路径")
    parser.add_argument("--sigma", type=float, default=None, help="LoG / 高斯的 σ")
    parser.add_argument("--side", type=int, default=None, help="核边长（奇数）")


def resolve_kernel(args: argparse.Namespace, config: LabConfig) -> Kernel:
    sigma = args.sigma if args.sigma is not None else float(config.get("log_sigma", 1.5))
    side = args.side if args.side is not None else int(config.get("log_side", 7))
    return build_kernel(args.kernel, side, sigma)


def add_inverse_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("逆核迭代")
    group.add_argument("--mode", default=None, help="least-squares / richardson")
    group.add_argument("--solver", default=None, help="least-squares 模式的求解器: cg / gradient")
    group.add_argument("--dt", type=float, default=None)
    group.add_argument("--epsilon", type=float, default=None)
    group.add_argument("--max-iters", type=int, default=None)
    group.add_argument("--support", type=int, default=None, help="M̃ 网格边长（奇数）")
    group.add_argument("--no-prescale", action="store_true", help="least-squares 模式下不做 L2 预缩放")


def resolve_inverse_config(args: argparse.Namespace, config: LabConfig) -> InverseConfig:
    return config.inverse_config(
        mode=args.mode,
        solver=args.solver,
        dt=args.dt,
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        support_side=args.support,
        prescale=False if args.no_prescale else None,
    )


def parse_point(text: str) -> tuple[int, int]:
    """'row,col' → (row, col)"""
    try:
        row, col = (int(part) for part in text.split(","))
    except ValueError:
        raise ArgumentError(f"坐标格式应为 row,col，实际 {text!r}")
    return row, col


def print_resolved(command: str, values: dict[str, Any]) -> None:
    """每次运行先打印解析后的完整配置"""
    printable = {key: _jsonable(value) for key, value in values.items()}
    print(f"# {command} {json.dumps(printable, ensure_ascii=False, sort_keys=True)}")


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def inverse_summary(cfg: InverseConfig) -> dict[str, Any]:
    return {
        "mode": cfg.mode.value,
        "solver": cfg.solver.value,
        "dt": cfg.dt,
        "epsilon": cfg.epsilon,
        "max_iters": cfg.max_iters,
        "support_side": cfg.support_side,
        "prescale": cfg.prescale,
    }


def write_kernel(path: str | None, values: np.ndarray, comments: list[str]) -> None:
    """写 KMAT；未给路径时打印到 stdout"""
    if path:
        save_kmat(path, values, comments)
    else:
        print(format_kmat(values, comments), end="")


def maybe_preview(path: str | None, values: np.ndarray) -> None:
    if path:
        save_preview(path, values)
