"""
Canny detector: Gaussian smoothing, Sobel gradients, non-maximal
suppression along the quantized gradient direction, and hysteresis through
8-connected components seeded by strong pixels.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from edges.edge_map import EdgeMap
from errors import ConfigurationError, PreconditionError

TAN_22_5 = np.tan(np.pi / 8)
MIN_SIZE = 5
# below this the image is treated as flat
FLAT_GRADIENT = 1e-8


@dataclass(frozen=True)
class CannyConfig:
    """Thresholds are fractions of the per-image maximum gradient magnitude"""

    sigma: float = 1.4
    low: float = 0.1
    high: float = 0.3

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.low < self.high <= 1:
            raise ConfigurationError(f"need 0 < low < high <= 1, got low={self.low} high={self.high}")


def _shifted(padded: np.ndarray, dr: int, dc: int, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    return padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]


def _non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    ax, ay = np.abs(gx), np.abs(gy)
    horizontal = ay <= TAN_22_5 * ax
    vertical = ~horizontal & (ax <= TAN_22_5 * ay)
    diagonal = ~horizontal & ~vertical
    falling = diagonal & (gx * gy > 0)
    rising = diagonal & ~falling

    padded = np.pad(mag, 1)
    shape = mag.shape
    keep = np.zeros(shape, dtype=bool)
    for region, (dr, dc) in (
        (horizontal, (0, 1)),
        (vertical, (1, 0)),
        (falling, (1, 1)),
        (rising, (1, -1)),
    ):
        ahead = _shifted(padded, dr, dc, shape)
        behind = _shifted(padded, -dr, -dc, shape)
        keep |= region & (mag >= ahead) & (mag >= behind)
    return np.where(keep, mag, 0.0)


def _hysteresis(strength: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = strength >= low
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    seeds = np.unique(labels[strength >= high])
    seeds = seeds[seeds > 0]
    return np.isin(labels, seeds)


def canny(img: np.ndarray, cfg: CannyConfig = CannyConfig()) -> EdgeMap:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or min(arr.shape) < MIN_SIZE:
        raise PreconditionError(f"canny needs a 2-D image of at least {MIN_SIZE}x{MIN_SIZE}, got {arr.shape}")

    smooth = ndimage.gaussian_filter(arr, cfg.sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= FLAT_GRADIENT:
        return EdgeMap(np.zeros(arr.shape, dtype=np.uint8), provenance="canny")

    # drop float noise so NMS ties resolve the same way after affine remaps
    mag = np.round(mag / peak, 9)
    edges = _hysteresis(_non_max_suppression(mag, gx, gy), cfg.low, cfg.high)
    return EdgeMap(edges.astype(np.uint8), provenance="canny")
