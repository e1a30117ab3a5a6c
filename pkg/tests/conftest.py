import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run scaled training experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured_image(rng):
    """Smooth gradient with a square and mild noise; has edges Canny can find"""
    y, x = np.mgrid[0:64, 0:64] / 63.0
    img = 0.3 + 0.3 * x + 0.1 * np.sin(6 * y)
    img[20:44, 20:44] += 0.3
    return np.clip(img + 0.02 * rng.standard_normal(img.shape), 0.0, 1.0)

