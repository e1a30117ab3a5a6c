"""
Central finite differences for checking analytic gradients
"""
from typing import Callable, Iterable, Optional

import numpy as np


def numerical_gradient(fn: Callable[[], float], x: np.ndarray, h: float = 1e-5,
                       indices: Optional[Iterable[tuple]] = None) -> np.ndarray:
    """
    Perturb x in place entry by entry and difference fn().

    Only the listed indices are perturbed when given; the rest of the returned
    array stays zero.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    if indices is None:
        indices = np.ndindex(*x.shape)
    for idx in indices:
        orig = x[idx]
        x[idx] = orig + h
        f_plus = fn()
        x[idx] = orig - h
        f_minus = fn()
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def sample_indices(shape: tuple, count: int, rng: np.random.Generator) -> list[tuple]:
    """Up to count distinct multi-indices of an array with this shape"""
    total = int(np.prod(shape))
    flat = rng.choice(total, size=min(count, total), replace=False)
    return [np.unravel_index(i, shape) for i in sorted(flat)]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max abs difference scaled by the larger max magnitude"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)
