"""
Adam optimizer state and the bias-corrected update step
"""
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from errors import ConfigurationError


@dataclass
class AdamState:
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-3, **hyper) -> "AdamState":
        """Fresh state with zero moments shaped like params"""
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            lr=lr,
            **hyper,
        )


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update; returns new parameter arrays and the advanced state"""
    if not (len(params) == len(grads) == len(state.first_moment) == len(state.second_moment)):
        raise ConfigurationError("params, grads and optimizer moments differ in length")

    t = state.step_count + 1
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    new_params, first, second = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ConfigurationError(f"shape mismatch in adam step: {p.shape} vs {g.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
        first.append(m)
        second.append(v)

    return new_params, replace(state, first_moment=first, second_moment=second, step_count=t)
