"""
Bjontegaard deltas between two rate-distortion curves: one least-squares
cubic per curve over log10(bpp), integrated across the overlapping range.
"""
import math

import numpy as np

from errors import PreconditionError
from metrics.rd import RDCurve

MIN_POINTS = 4


def _log_rates_and_psnrs(curve: RDCurve) -> tuple[np.ndarray, np.ndarray]:
    if len(curve.points) < MIN_POINTS:
        raise PreconditionError(f"curve '{curve.label}' has {len(curve.points)} points, "
                                f"Bjontegaard needs at least {MIN_POINTS}")
    rates = np.log10([p.bpp for p in curve.points])
    psnrs = np.array([p.psnr for p in curve.points], dtype=np.float64)
    if not np.all(np.isfinite(psnrs)):
        raise PreconditionError(f"curve '{curve.label}' has a non-finite PSNR")
    return rates, psnrs


def _overlap(x1: np.ndarray, x2: np.ndarray) -> tuple[float, float]:
    low = max(float(x1.min()), float(x2.min()))
    high = min(float(x1.max()), float(x2.max()))
    if high <= low:
        raise PreconditionError("rate-distortion curves do not overlap")
    return low, high


def _mean_difference(x1, y1, x2, y2) -> tuple[float, tuple[float, float]]:
    """Average of fit2 - fit1 over the overlap of the abscissas"""
    low, high = _overlap(x1, x2)
    int1 = np.polyint(np.polyfit(x1, y1, 3))
    int2 = np.polyint(np.polyfit(x2, y2, 3))
    area1 = np.polyval(int1, high) - np.polyval(int1, low)
    area2 = np.polyval(int2, high) - np.polyval(int2, low)
    return float((area2 - area1) / (high - low)), (low, high)


def bd_psnr(curve_a: RDCurve, curve_b: RDCurve) -> float:
    """Average PSNR gain of B over A at equal rate, in dB"""
    rates_a, psnrs_a = _log_rates_and_psnrs(curve_a)
    rates_b, psnrs_b = _log_rates_and_psnrs(curve_b)
    diff, _ = _mean_difference(rates_a, psnrs_a, rates_b, psnrs_b)
    return diff


def bd_rate(curve_a: RDCurve, curve_b: RDCurve) -> float:
    """Average bit-rate change of B against A at equal PSNR, in percent; negative is a saving"""
    rates_a, psnrs_a = _log_rates_and_psnrs(curve_a)
    rates_b, psnrs_b = _log_rates_and_psnrs(curve_b)
    diff, _ = _mean_difference(psnrs_a, rates_a, psnrs_b, rates_b)
    return (math.pow(10.0, diff) - 1.0) * 100.0


def bd_report(curve_a: RDCurve, curve_b: RDCurve) -> dict:
    rates_a, psnrs_a = _log_rates_and_psnrs(curve_a)
    rates_b, psnrs_b = _log_rates_and_psnrs(curve_b)
    return {
        "pair": f"{curve_b.label} vs {curve_a.label}",
        "bd_psnr_db": bd_psnr(curve_a, curve_b),
        "bd_rate_percent": bd_rate(curve_a, curve_b),
        "overlap": {
            "log10_bpp": list(_overlap(rates_a, rates_b)),
            "psnr_db": list(_overlap(psnrs_a, psnrs_b)),
        },
    }
