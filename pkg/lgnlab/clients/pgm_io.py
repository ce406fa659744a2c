"""PGM 读写（P2 ASCII / P5 二进制，maxval ≤ 65535）。

带符号的图像通过注释行 ``# range lo hi`` 记录 [lo, hi] → [0, maxval] 的仿射映射。
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core.errors import ArgumentError, ParseError
from ..core.image_ops import as_image

MAX_MAXVAL = 65535
RANGE_TAG = "range"


def _default_range(image: np.ndarray) -> tuple[float, float]:
    lo = float(image.min())
    hi = float(image.max())
    if lo >= 0.0 and hi <= 1.0:
        return 0.0, 1.0
    if lo >= -1.0 and hi <= 1.0:
        return -1.0, 1.0
    if hi <= lo:
        return lo, lo + 1.0
    return lo, hi


def quantize(image: np.ndarray, maxval: int, value_range: tuple[float, float]) -> np.ndarray:
    lo, hi = value_range
    if not hi > lo:
        raise ArgumentError(f"PGM 数值范围无效: {value_range}")
    scaled = (image - lo) / (hi - lo) * maxval
    return np.clip(np.rint(scaled), 0, maxval).astype(np.int64)


def encode_pgm(
    image: np.ndarray,
    *,
    maxval: int = 255,
    value_range: tuple[float, float] | None = None,
    binary: bool = True,
) -> bytes:
    image = as_image(image)
    if not 1 <= maxval <= MAX_MAXVAL:
        raise ArgumentError(f"maxval 必须在 1..{MAX_MAXVAL}，实际 {maxval}")
    lo, hi = value_range if value_range is not None else _default_range(image)
    levels = quantize(image, maxval, (lo, hi))
    rows, cols = image.shape
    header = (
        f"{'P5' if binary else 'P2'}\n"
        f"# {RANGE_TAG} {lo!r} {hi!r}\n"
        f"{cols} {rows}\n"
        f"{maxval}\n"
    ).encode("ascii")
    if binary:
        dtype = ">u1" if maxval < 256 else ">u2"
        return header + levels.astype(dtype).tobytes()
    body = "\n".join(" ".join(str(v) for v in row) for row in levels)
    return header + body.encode("ascii") + b"\n"


def save_pgm(
    path: str | Path,
    image: np.ndarray,
    *,
    maxval: int = 255,
    value_range: tuple[float, float] | None = None,
    binary: bool = True,
) -> None:
    Path(path).write_bytes(
        encode_pgm(image, maxval=maxval, value_range=value_range, binary=binary)
    )


def _read_header(data: bytes, path: str | Path | None):
    """返回 (magic, width, height, maxval, 头结束偏移, 注释列表)"""
    pos = 0
    fields: list[tuple[str, int]] = []
    comments: list[str] = []
    while len(fields) < 4:
        if pos >= len(data):
            raise ParseError(f"PGM 头不完整，只读到 {len(fields)} 个字段", offset=pos, path=path)
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
            continue
        if ch == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos + 1 : end].decode("ascii", errors="replace").strip())
            pos = end
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        fields.append((data[start:pos].decode("ascii", errors="replace"), start))

    magic, magic_offset = fields[0]
    if magic not in ("P2", "P5"):
        raise ParseError(f"不支持的 PGM 魔数: {magic!r}", offset=magic_offset, path=path)
    numbers: list[int] = []
    for text, offset in fields[1:]:
        try:
            numbers.append(int(text))
        except ValueError:
            raise ParseError(f"PGM 头字段不是整数: {text!r}", offset=offset, path=path)
    width, height, maxval = numbers
    if width < 1 or height < 1:
        raise ParseError(f"PGM 尺寸无效: {width}x{height}", offset=fields[1][1], path=path)
    if not 1 <= maxval <= MAX_MAXVAL:
        raise ParseError(f"PGM maxval 超出范围: {maxval}", offset=fields[3][1], path=path)
    return magic, width, height, maxval, pos, comments


def _parse_range(comments: list[str]) -> tuple[float, float] | None:
    for comment in comments:
        parts = comment.split()
        if len(parts) == 3 and parts[0] == RANGE_TAG:
            try:
                return float(parts[1]), float(parts[2])
            except ValueError:
                return None
    return None


def decode_pgm(data: bytes, *, path: str | Path | None = None) -> np.ndarray:
    magic, width, height, maxval, pos, comments = _read_header(data, path)
    count = width * height
    if magic == "P5":
        # maxval 之后恰好一个空白字节
        start = pos + 1
        sample_bytes = 1 if maxval < 256 else 2
        expected = count * sample_bytes
        found = max(0, len(data) - start)
        if found < expected:
            raise ParseError(
                f"P5 数据截断: 期望 {expected} 字节，实际 {found} 字节",
                offset=start,
                path=path,
            )
        dtype = ">u1" if sample_bytes == 1 else ">u2"
        levels = np.frombuffer(data, dtype=dtype, count=count, offset=start).astype(np.int64)
    else:
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise ParseError(
                f"P2 数据截断: 期望 {count} 个数值，实际 {len(tokens)} 个",
                offset=pos,
                path=path,
            )
        try:
            levels = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError:
            raise ParseError("P2 数据包含非整数", offset=pos, path=path)
    if levels.size and int(levels.max()) > maxval:
        raise ParseError(f"像素值超过 maxval={maxval}", offset=pos, path=path)

    lo, hi = _parse_range(comments) or (0.0, 1.0)
    values = levels.reshape(height, width).astype(np.float64) / maxval
    return values * (hi - lo) + lo


def load_pgm(path: str | Path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes(), path=path)
