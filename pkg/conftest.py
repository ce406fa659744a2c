import os
import sys

import numpy as np
import pytest
from scipy import ndimage

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

MNIST_ENV = "LGNLAB_MNIST_DIR"
FASHION_ENV = "LGNLAB_FASHION_DIR"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 分钟级的完整训练 / 大网格测试")


def make_dead_leaves(rng: np.random.Generator, side: int = 64, count: int = 150) -> np.ndarray:
    """随机大小、随机灰度的圆盘互相遮挡，轻微模糊后落在 [0, 1]，近似自然图像统计"""
    image = np.full((side, side), rng.uniform(0.2, 0.8))
    yy, xx = np.mgrid[0:side, 0:side]
    radii = side / 4.0 * rng.uniform(0.05, 1.0, size=count) ** 2 + 1.0
    for radius in radii:
        cy, cx = rng.uniform(0, side, size=2)
        image[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius] = rng.uniform(0.0, 1.0)
    return np.clip(ndimage.gaussian_filter(image, 0.7), 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def natural_images():
    generator = np.random.default_rng(7)
    return [make_dead_leaves(generator) for _ in range(8)]


@pytest.fixture
def mnist_dirs():
    mnist = os.environ.get(MNIST_ENV)
    fashion = os.environ.get(FASHION_ENV)
    if not mnist or not fashion:
        pytest.skip(f"需要设置 {MNIST_ENV} 与 {FASHION_ENV}")
    return mnist, fashion
