from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .log import logger

MID_GRAY = 128
MAX_UPSCALE = 64


def to_uint8(values: np.ndarray) -> np.ndarray:
    """[min, max] 仿射映射到 [0, 255]，常数图输出中灰"""
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return np.full(values.shape, MID_GRAY, dtype=np.uint8)
    scaled = (values - lo) / (hi - lo) * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def render_grayscale_png(values: np.ndarray, upscale: int = 1) -> bytes:
    image = Image.fromarray(to_uint8(values))
    upscale = int(np.clip(upscale, 1, MAX_UPSCALE))
    if upscale > 1:
        image = image.resize(
            (image.width * upscale, image.height * upscale),
            resample=Image.Resampling.NEAREST,
        )
    return _image_to_png_bytes(image)


def auto_upscale(shape: tuple[int, ...], target: int = 256) -> int:
    """小核放大到约 target 像素宽，方便肉眼查看"""
    return max(1, target // max(shape))


def save_preview(path: str | Path, values: np.ndarray, upscale: int | None = None) -> bool:
    """写 PNG 预览；失败只记录日志，不影响主流程"""
    try:
        scale = auto_upscale(np.shape(values)) if upscale is None else upscale
        data = render_grayscale_png(values, scale)
        Path(path).write_bytes(data)
        logger.info(f"预览图已写入: {path} ({len(data)} bytes)")
        return True
    except Exception as e:
        logger.error(f"预览图渲染失败: {e}")
        return False


def _image_to_png_bytes(image: Image.Image) -> bytes:
    output = io.BytesIO()
    image.save(output, format="PNG", optimize=True)
    return output.getvalue()
