from __future__ import annotations

from pathlib import Path


class LabError(Exception):
    """库内主动抛出的所有错误的基类，code 用于 CLI 的 ``ERROR <code>: <detail>`` 行"""

    code = "internal"
    exit_code = 2


class ArgumentError(LabError, ValueError):
    code = "argument"
    exit_code = 1


class DimensionError(LabError, ValueError):
    code = "dimension"


class UndefinedCorrelationError(LabError, ValueError):
    code = "correlation"


class DegenerateNormalizationError(LabError, ValueError):
    code = "degenerate"


class ParseError(LabError):
    code = "parse"

    def __init__(self, message: str, *, offset: int, path: str | Path | None = None):
        self.offset = offset
        self.path = str(path) if path is not None else None
        where = f"{self.path} " if self.path else ""
        super().__init__(f"{where}@{offset}: {message}")


class PairingError(ParseError):
    code = "pairing"


class FitFailureError(LabError):
    code = "fit"

    def __init__(self, message: str, *, best_residual: float):
        self.best_residual = best_residual
        super().__init__(f"{message} (best_residual={best_residual:.6g})")


class DivergenceError(LabError):
    code = "divergence"

    def __init__(self, *, mode: str, dt: float, iteration: int, update_norm: float):
        self.mode = mode
        self.dt = dt
        self.iteration = iteration
        self.update_norm = update_norm
        super().__init__(
            f"逆核迭代发散: mode={mode} dt={dt:g} iteration={iteration} "
            f"update_l1={update_norm:.3g}"
        )


class TrainingDivergedError(LabError):
    code = "training"

    def __init__(self, *, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"训练发散: epoch={epoch} batch={batch} loss={loss}")
