"""
MSE (post-net objective) and the edge-aware loss
alpha * MSE + gamma * MSE(E o r) used for the pre-net. Both reduce by the
mean over pixels and return (value, gradient w.r.t. the prediction).
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from edges.edge_map import EdgeMap
from errors import ConfigurationError


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.75

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"loss alpha must be in [0, 1], got {self.alpha}")

    @property
    def gamma(self) -> float:
        return 1.0 - self.alpha


def _residual(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigurationError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    return pred - target


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    r = _residual(pred, target)
    return float(np.mean(r ** 2)), 2.0 * r / r.size


def _edge_weights(edges: Union[EdgeMap, np.ndarray], shape: tuple) -> np.ndarray:
    mask = edges.as_weights() if isinstance(edges, EdgeMap) else np.asarray(edges, dtype=np.float64)
    if mask.shape == shape[-2:]:
        mask = np.broadcast_to(mask, shape)
    if mask.shape != shape:
        raise ConfigurationError(f"edge map {mask.shape} does not match prediction {shape}")
    return mask


def edge_aware_loss(pred: np.ndarray, target: np.ndarray, edges: Union[EdgeMap, np.ndarray],
                    cfg: LossConfig = LossConfig()) -> tuple[float, np.ndarray]:
    """
    alpha * mean(r^2) + gamma * mean((E o r)^2), with r = pred - target.

    E is binary so (E o r)^2 = E o r^2 and the loss is a per-pixel weighted
    MSE with weights alpha + gamma * E. Edge pixels get weight exactly 1, so
    with E = 1 or alpha = 1 the value is bit-identical to mse_loss.
    """
    r = _residual(pred, target)
    mask = _edge_weights(edges, r.shape)
    weights = np.where(mask == 1, 1.0, cfg.alpha + cfg.gamma * mask)
    return float(np.mean(weights * r ** 2)), 2.0 * weights * r / r.size
