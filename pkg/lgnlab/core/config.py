from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from .errors import ArgumentError
from .log import logger

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "_conf_schema.json"
THREADS_ENV = "LGNLAB_THREADS"

_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}


def _parse_bool(value: Any) -> bool:
    """JSON 的 true/false，或 "true" / "off" 这类文本；其它值视为类型错误"""
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in _TRUE_WORDS:
            return True
        if text in _FALSE_WORDS:
            return False
    raise ValueError(f"无法解析为布尔值: {value!r}")


_CASTS = {
    "bool": _parse_bool,
    "int": int,
    "float": float,
    "string": str,
}


def load_schema(path: Path = SCHEMA_PATH) -> dict[str, dict[str, Any]]:
    return json.loads(path.read_text("utf-8"))


class LabConfig:
    """schema 默认值 + 用户 JSON 覆盖，用法同 ``config.get(key, default)``"""

    def __init__(self, values: dict[str, Any], schema: dict[str, dict[str, Any]]):
        self._values = values
        self._schema = schema

    @classmethod
    def load(cls, path: str | Path | None = None) -> "LabConfig":
        schema = load_schema()
        values = {key: item.get("default") for key, item in schema.items()}
        if path is None:
            return cls(values, schema)

        config_path = Path(path)
        try:
            data = json.loads(config_path.read_text("utf-8"))
        except FileNotFoundError:
            raise ArgumentError(f"配置文件不存在: {config_path}")
        except json.JSONDecodeError as e:
            logger.error(f"配置文件解析失败，已使用默认值: {config_path} ({e})")
            return cls(values, schema)
        if not isinstance(data, dict):
            logger.error(f"配置文件格式异常，已使用默认值: {config_path}")
            return cls(values, schema)

        for key, value in data.items():
            item = schema.get(key)
            if item is None:
                logger.warning(f"忽略未知配置项: {key}")
                continue
            cast = _CASTS.get(item.get("type", "string"), str)
            try:
                values[key] = cast(value)
            except (TypeError, ValueError):
                raise ArgumentError(f"配置项 {key} 类型错误: {value!r}")
        return cls(values, schema)

    def get(self, key: str, default: Any = None) -> Any:
        return self._values.get(key, default)

    def as_dict(self) -> dict[str, Any]:
        return dict(self._values)

    @staticmethod
    def threads() -> int:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 0
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"{THREADS_ENV}={raw!r} 不是整数，按 0（顺序参考模式）处理")
            return 0
        return max(0, value)

    def inverse_config(self, **overrides: Any):
        from .inverse import InverseConfig, InverseMode, InverseSolver

        values = {
            "dt": float(self.get("inverse_dt", 0.1)),
            "epsilon": float(self.get("inverse_epsilon", 1e-6)),
            "max_iters": int(self.get("inverse_max_iters", 20000)),
            "support_side": int(self.get("inverse_support", 41)),
            "mode": InverseMode.parse(str(self.get("inverse_mode", "least-squares"))),
            "solver": InverseSolver.parse(str(self.get("inverse_solver", "cg"))),
            "prescale": bool(self.get("inverse_prescale", True)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return InverseConfig(**values)

    def train_config(self, **overrides: Any):
        from .toy_train import TrainConfig

        values = {
            "epochs": int(self.get("train_epochs", 25)),
            "lr": float(self.get("train_lr", 0.01)),
            "momentum": float(self.get("train_momentum", 0.9)),
            "l2": float(self.get("train_l2", 0.02)),
            "batch_size": int(self.get("train_batch_size", 128)),
            "lr_drop_factor": float(self.get("train_lr_drop_factor", 0.97)),
            "seed": int(self.get("train_seed", 0)),
            "augmentation": str(self.get("augmentation", "none")),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return TrainConfig(**values)
