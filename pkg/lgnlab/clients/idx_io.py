"""MNIST 风格 IDX 文件读取（需预先解压，不处理 gzip）。

    [offset] [type]          [value]          [description]
    0000     32 bit integer  0x00000803(2051) magic number (images)
    0004     32 bit integer  N                number of images
    0008     32 bit integer  rows
    0012     32 bit integer  cols
    0016     unsigned byte   ...              pixels

    0000     32 bit integer  0x00000801(2049) magic number (labels)
    0004     32 bit integer  N                number of items
    0008     unsigned byte   ...              labels
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..core.errors import PairingError, ParseError
from ..core.log import logger

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


def decode_idx(data: bytes, *, path: str | Path | None = None) -> np.ndarray:
    """图像文件 → (N, rows, cols) float64 ∈ [0,1]；标签文件 → (N,) int64"""
    if len(data) < 8:
        raise ParseError(f"IDX 头截断: 只有 {len(data)} 字节", offset=0, path=path)
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IMAGES_MAGIC:
        if len(data) < 16:
            raise ParseError(f"IDX 图像头截断: 只有 {len(data)} 字节", offset=4, path=path)
        count, rows, cols = struct.unpack(">III", data[4:16])
        shape = (count, rows, cols)
        offset = 16
    elif magic == LABELS_MAGIC:
        (count,) = struct.unpack(">I", data[4:8])
        shape = (count,)
        offset = 8
    else:
        raise ParseError(f"未知的 IDX 魔数: {magic:#010x}", offset=0, path=path)

    expected = int(np.prod(shape))
    found = len(data) - offset
    if found < expected:
        raise ParseError(
            f"IDX 数据截断: 期望 {expected} 字节，实际 {found} 字节",
            offset=offset,
            path=path,
        )
    if found > expected:
        raise ParseError(
            f"IDX 维度与数据长度不符: 声明 {shape}，多出 {found - expected} 字节",
            offset=offset + expected,
            path=path,
        )

    payload = np.frombuffer(data, dtype=np.uint8, count=expected, offset=offset)
    if magic == IMAGES_MAGIC:
        return payload.reshape(shape).astype(np.float64) / 255.0
    return payload.astype(np.int64)


def load_idx(path: str | Path) -> np.ndarray:
    path = Path(path)
    array = decode_idx(path.read_bytes(), path=path)
    logger.debug(f"IDX 读取完成: {path.name} shape={array.shape}")
    return array


def load_idx_pair(images_path: str | Path, labels_path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise PairingError("第一个文件不是 IDX 图像文件", offset=0, path=images_path)
    if labels.ndim != 1:
        raise PairingError("第二个文件不是 IDX 标签文件", offset=0, path=labels_path)
    if len(images) != len(labels):
        raise PairingError(
            f"图像数 {len(images)} 与标签数 {len(labels)} 不一致",
            offset=4,
            path=labels_path,
        )
    return images, labels
