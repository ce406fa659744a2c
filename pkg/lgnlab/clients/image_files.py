from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..core.errors import ParseError
from ..core.log import logger
from .pgm_io import load_pgm

PGM_SUFFIXES = {".pgm"}
RASTER_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".gif"}


def load_image(path: str | Path) -> np.ndarray:
    """PGM 走自带解码器，其余格式用 Pillow 转 8 位灰度并缩放到 [0,1]"""
    path = Path(path)
    if path.suffix.lower() in PGM_SUFFIXES:
        return load_pgm(path)
    try:
        with Image.open(path) as image:
            gray = image.convert("L")
            return np.asarray(gray, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as e:
        raise ParseError(f"无法解码图像: {e}", offset=0, path=path)


def load_image_dir(directory: str | Path) -> list[tuple[str, np.ndarray]]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError("不是目录", offset=0, path=directory)
    images: list[tuple[str, np.ndarray]] = []
    for path in sorted(directory.iterdir()):
        suffix = path.suffix.lower()
        if suffix not in PGM_SUFFIXES and suffix not in RASTER_SUFFIXES:
            continue
        images.append((path.name, load_image(path)))
    logger.info(f"从 {directory} 读取了 {len(images)} 张图像")
    return images
