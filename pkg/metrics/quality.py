"""
Full-reference quality metrics on the 8-bit scale. Inputs are [0, 1]
images; every function rescales by 255 before measuring.
"""
import math
from typing import Union

import numpy as np
from scipy import signal

from edges.edge_map import EdgeMap
from errors import ConfigurationError, PreconditionError

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError(f"images differ in dims: {a.shape} vs {b.shape}")
    if a.ndim != 2 or a.size == 0:
        raise PreconditionError(f"metrics need non-empty 2-D images, got shape {a.shape}")
    return a * PEAK, b * PEAK


def _psnr_from_mse(mse: float) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(PEAK ** 2 / mse)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB; math.inf for identical images"""
    a, b = _pair(a, b)
    return _psnr_from_mse(float(np.mean((a - b) ** 2)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_maps(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window SSIM and contrast-structure maps (valid region only)"""
    window = gaussian_window()

    def filt(x):
        return signal.convolve2d(x, window, mode="valid")

    mu_a = filt(a)
    mu_b = filt(b)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = filt(a * a) - mu_aa
    var_b = filt(b * b) - mu_bb
    cov = filt(a * b) - mu_ab

    cs = (2.0 * cov + SSIM_C2) / (var_a + var_b + SSIM_C2)
    luminance = (2.0 * mu_ab + SSIM_C1) / (mu_aa + mu_bb + SSIM_C1)
    return luminance * cs, cs


def _check_window(shape: tuple[int, int]):
    if min(shape) < SSIM_WINDOW:
        raise PreconditionError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {shape}")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _pair(a, b)
    _check_window(a.shape)
    ssim_map, _ = _ssim_maps(a, b)
    return float(np.mean(ssim_map))


def ms_ssim_scales(shape: tuple[int, int]) -> int:
    """Number of dyadic scales that still fit one SSIM window"""
    _check_window(shape)
    return min(len(MS_SSIM_WEIGHTS), int(math.floor(math.log2(min(shape) / SSIM_WINDOW))) + 1)


def _downsample(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    Multi-scale SSIM. Images too small for five scales use fewer, with the
    leading weights renormalized to sum to one; a single scale reduces to ssim.
    """
    a, b = _pair(a, b)
    scales = ms_ssim_scales(a.shape)
    weights = np.array(MS_SSIM_WEIGHTS[:scales])
    weights = weights / weights.sum()

    values = []
    for level in range(scales):
        ssim_map, cs_map = _ssim_maps(a, b)
        if level == scales - 1:
            values.append(float(np.mean(ssim_map)))
        else:
            values.append(float(np.mean(cs_map)))
            a, b = _downsample(a), _downsample(b)

    if scales == 1:
        return values[0]
    # fractional powers of negative terms are undefined
    values = np.maximum(np.array(values), 0.0)
    return float(np.prod(values ** weights))


def msssim_db(value: float) -> float:
    """-10 log10(MS-SSIM), the dB view used for plotting"""
    if value <= 0:
        return math.inf
    if value >= 1:
        return 0.0
    return -10.0 * math.log10(value)


def _boundary_sums(y: np.ndarray, block: int) -> tuple[float, int, float, int]:
    """Squared differences across block boundaries and across all other neighbour pairs"""
    boundary_sq = 0.0
    boundary_n = 0
    inner_sq = 0.0
    inner_n = 0
    for arr in (y, y.T):
        diffs = (arr[:, :-1] - arr[:, 1:]) ** 2
        on_boundary = (np.arange(arr.shape[1] - 1) % block) == block - 1
        boundary_sq += float(diffs[:, on_boundary].sum())
        boundary_n += int(on_boundary.sum()) * arr.shape[0]
        inner_sq += float(diffs[:, ~on_boundary].sum())
        inner_n += int((~on_boundary).sum()) * arr.shape[0]
    return boundary_sq, boundary_n, inner_sq, inner_n


def blocking_effect_factor(test: np.ndarray, block: int = 8) -> float:
    """Blocking effect factor of a [0, 1] image on the 8-bit scale"""
    y = np.asarray(test, dtype=np.float64) * PEAK
    if block < 2:
        raise PreconditionError(f"block size must be >= 2, got {block}")
    if y.ndim != 2 or min(y.shape) < block:
        raise PreconditionError(f"PSNR-B needs at least one {block}x{block} block, got shape {y.shape}")
    boundary_sq, boundary_n, inner_sq, inner_n = _boundary_sums(y, block)
    d_boundary = boundary_sq / boundary_n if boundary_n else 0.0
    d_inner = inner_sq / inner_n if inner_n else 0.0
    if d_boundary <= d_inner:
        return 0.0
    eta = math.log2(block) / math.log2(min(y.shape))
    return eta * (d_boundary - d_inner)


def psnrb(reference: np.ndarray, test: np.ndarray, block: int = 8) -> float:
    """PSNR with the blocking effect factor of the test image added to the MSE"""
    ref, tst = _pair(reference, test)
    bef = blocking_effect_factor(test, block)
    return _psnr_from_mse(float(np.mean((ref - tst) ** 2)) + bef)


def _mask(e: Union[EdgeMap, np.ndarray]) -> np.ndarray:
    if isinstance(e, EdgeMap):
        return e.mask.astype(bool)
    return np.asarray(e) > 0.5


def miou(e1: Union[EdgeMap, np.ndarray], e2: Union[EdgeMap, np.ndarray]) -> float:
    """Mean IoU over the edge and non-edge classes; a class absent from both maps scores 1"""
    m1, m2 = _mask(e1), _mask(e2)
    if m1.shape != m2.shape:
        raise ConfigurationError(f"edge maps differ in dims: {m1.shape} vs {m2.shape}")
    ious = []
    for a, b in ((m1, m2), (~m1, ~m2)):
        union = int(np.logical_or(a, b).sum())
        ious.append(1.0 if union == 0 else int(np.logical_and(a, b).sum()) / union)
    return float(np.mean(ious))
