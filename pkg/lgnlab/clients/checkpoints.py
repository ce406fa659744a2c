"""玩具网络检查点：``TOYMODEL 1`` 头 + psi0、conv_bias、fc_weights、fc_bias 四个 KMAT 体。"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core.errors import DimensionError, ParseError
from ..core.toy_net import ToyModel
from .kmat_io import format_kmat_list, parse_kmat_list

CHECKPOINT_MAGIC = "TOYMODEL"
CHECKPOINT_VERSION = "1"


def format_checkpoint(model: ToyModel) -> str:
    return format_kmat_list(
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        [
            model.psi0,
            np.array([[model.conv_bias]]),
            model.fc_weights,
            model.fc_bias.reshape(1, -1),
        ],
    )


def save_checkpoint(path: str | Path, model: ToyModel) -> None:
    Path(path).write_text(format_checkpoint(model), encoding="ascii")


def parse_checkpoint(data: bytes, *, path: str | Path | None = None) -> ToyModel:
    params, bodies = parse_kmat_list(data, CHECKPOINT_MAGIC, path=path)
    if params != [CHECKPOINT_VERSION]:
        raise ParseError(f"不支持的检查点版本: {' '.join(params) or '缺失'}", offset=0, path=path)
    if len(bodies) != 4:
        raise ParseError(f"检查点应包含 4 个矩阵，实际 {len(bodies)} 个", offset=len(data), path=path)
    psi0, conv_bias, fc_weights, fc_bias = bodies
    if conv_bias.shape != (1, 1) or fc_bias.shape[0] != 1:
        raise ParseError(f"偏置形状异常: {conv_bias.shape} / {fc_bias.shape}", offset=0, path=path)
    try:
        return ToyModel(psi0, float(conv_bias[0, 0]), fc_weights, fc_bias[0])
    except DimensionError as e:
        raise ParseError(str(e), offset=0, path=path)


def load_checkpoint(path: str | Path) -> ToyModel:
    return parse_checkpoint(Path(path).read_bytes(), path=path)
