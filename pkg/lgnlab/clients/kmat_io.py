"""KMAT 文本矩阵格式及其列表容器（KBANK 滤波器组、TOYMODEL 检查点）。

KMAT:
    KMAT <rows> <cols>
    # 可选注释行，只能出现在数据之前
    <rows·cols 个十进制 float64，行优先，空白分隔>
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..core.errors import ParseError
from ..core.image_ops import as_kernel

KMAT_MAGIC = "KMAT"
KBANK_MAGIC = "KBANK"
SIGNIFICANT_DIGITS = 17

_TOKEN = re.compile(rb"\S+")


class _TokenReader:
    """按字节偏移读取空白分隔的 token；行首 ``#`` 的整行视为注释"""

    def __init__(self, data: bytes, path: str | Path | None = None, offset: int = 0):
        self.data = data
        self.path = path
        self.pos = offset

    def _skip_blank_and_comments(self, allow_comments: bool) -> None:
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos : self.pos + 1]
            if ch.isspace():
                self.pos += 1
                continue
            if ch == b"#":
                line_start = data.rfind(b"\n", 0, self.pos) + 1
                if data[line_start : self.pos].strip():
                    raise self.error("注释必须独占一行", self.pos)
                if not allow_comments:
                    raise self.error("数据区内不允许注释", self.pos)
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
                continue
            break

    def next(self, what: str, *, allow_comments: bool = False) -> tuple[str, int]:
        self._skip_blank_and_comments(allow_comments)
        match = _TOKEN.match(self.data, self.pos)
        if match is None:
            raise self.error(f"文件提前结束，缺少 {what}", self.pos)
        self.pos = match.end()
        return match.group().decode("ascii", errors="replace"), match.start()

    def next_int(self, what: str, *, allow_comments: bool = False) -> int:
        token, offset = self.next(what, allow_comments=allow_comments)
        try:
            value = int(token)
        except ValueError:
            raise self.error(f"{what} 不是整数: {token!r}", offset)
        if value < 1:
            raise self.error(f"{what} 必须为正整数: {value}", offset)
        return value

    def at_end(self) -> bool:
        self._skip_blank_and_comments(allow_comments=True)
        return self.pos >= len(self.data)

    def error(self, message: str, offset: int) -> ParseError:
        return ParseError(message, offset=offset, path=self.path)


def _read_body(reader: _TokenReader) -> np.ndarray:
    token, offset = reader.next("KMAT 头", allow_comments=True)
    if token != KMAT_MAGIC:
        raise reader.error(f"期望 {KMAT_MAGIC}，实际 {token!r}", offset)
    rows = reader.next_int("行数")
    cols = reader.next_int("列数")
    values = np.empty(rows * cols, dtype=np.float64)
    for index in range(rows * cols):
        token, offset = reader.next(
            f"第 {index} 个数值（共 {rows * cols} 个）",
            allow_comments=index == 0,
        )
        try:
            value = float(token)
        except ValueError:
            raise reader.error(f"不是十进制数: {token!r}", offset)
        if not np.isfinite(value):
            raise reader.error(f"数值必须有限: {token!r}", offset)
        values[index] = value
    return values.reshape(rows, cols)


def parse_kmat(
    data: bytes,
    *,
    path: str | Path | None = None,
    kernel: bool = False,
) -> np.ndarray:
    reader = _TokenReader(data, path)
    start = reader.pos
    values = _read_body(reader)
    if not reader.at_end():
        raise reader.error("KMAT 数据之后存在多余内容", reader.pos)
    if kernel:
        rows, cols = values.shape
        if rows != cols or rows % 2 == 0:
            raise reader.error(f"作为卷积核读取时边长必须为奇数方阵: {rows}x{cols}", start)
        return as_kernel(values)
    return values


def load_kmat(path: str | Path, *, kernel: bool = False) -> np.ndarray:
    return parse_kmat(Path(path).read_bytes(), path=path, kernel=kernel)


def _format_value(value: float) -> str:
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def format_kmat(values: np.ndarray, comments: Iterable[str] = ()) -> str:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.ndim != 2:
        raise ValueError(f"KMAT 只能保存二维数组，实际形状 {values.shape}")
    lines = [f"{KMAT_MAGIC} {values.shape[0]} {values.shape[1]}"]
    lines.extend(f"# {comment}" for comment in comments)
    for row in values:
        lines.append(" ".join(_format_value(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def save_kmat(path: str | Path, values: np.ndarray, comments: Iterable[str] = ()) -> None:
    Path(path).write_text(format_kmat(values, comments), encoding="ascii")


def parse_kmat_list(
    data: bytes,
    magic: str,
    *,
    path: str | Path | None = None,
) -> tuple[list[str], list[np.ndarray]]:
    """读取 ``<magic> <参数...>`` 行后跟若干 KMAT 体的容器，返回 (头参数, 矩阵列表)"""
    line_end = data.find(b"\n")
    header_line = data if line_end < 0 else data[:line_end]
    fields = header_line.decode("ascii", errors="replace").split()
    if not fields or fields[0] != magic:
        raise ParseError(f"期望 {magic} 头", offset=0, path=path)
    reader = _TokenReader(data, path, offset=len(header_line))
    bodies: list[np.ndarray] = []
    while not reader.at_end():
        bodies.append(_read_body(reader))
    return fields[1:], bodies


def format_kmat_list(header: str, matrices: Sequence[np.ndarray]) -> str:
    return header + "\n" + "".join(format_kmat(m) for m in matrices)


def load_bank(path: str | Path) -> list[np.ndarray]:
    """读取滤波器组：KBANK 文件，或按文件名排序的 KMAT 目录"""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".kmat")
        if not files:
            raise ParseError("目录中没有 .kmat 文件", offset=0, path=path)
        return [load_kmat(p, kernel=True) for p in files]

    data = path.read_bytes()
    params, bodies = parse_kmat_list(data, KBANK_MAGIC, path=path)
    if len(params) != 2:
        raise ParseError("KBANK 头应为 'KBANK <count> <side>'", offset=0, path=path)
    try:
        count, side = int(params[0]), int(params[1])
    except ValueError:
        raise ParseError(f"KBANK 头参数不是整数: {params}", offset=0, path=path)
    if len(bodies) != count:
        raise ParseError(
            f"KBANK 声明 {count} 个滤波器，实际读到 {len(bodies)} 个",
            offset=len(data),
            path=path,
        )
    for index, body in enumerate(bodies):
        if body.shape != (side, side):
            raise ParseError(
                f"第 {index} 个滤波器形状 {body.shape} 与声明的边长 {side} 不符",
                offset=0,
                path=path,
            )
    return [as_kernel(body) for body in bodies]


def save_bank(path: str | Path, filters: Sequence[np.ndarray]) -> None:
    if not filters:
        raise ValueError("滤波器组为空")
    side = np.shape(filters[0])[0]
    Path(path).write_text(
        format_kmat_list(f"{KBANK_MAGIC} {len(filters)} {side}", filters),
        encoding="ascii",
    )
