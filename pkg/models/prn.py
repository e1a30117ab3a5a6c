"""
Pre-processing network: three 3x3 convolutions producing the codec input Y.
In CR mode one layer (the last by default) uses stride 2.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import ConfigurationError, PreconditionError
from models.common import MODE_CR, STRIDE_FIRST, STRIDE_LAST, STRIDE_POSITIONS, check_mode
from nn.tensor import ConvLayer, Tensor, as_tensor, conv2d_backward, conv2d_forward, he_init, relu_backward, relu_forward


@dataclass
class PrNParams:
    """phi_1: L1 -> ReLU -> L2 -> ReLU -> L3 (linear), no normalization"""

    l1: ConvLayer
    l2: ConvLayer
    l3: ConvLayer
    mode: str

    @classmethod
    def create(cls, mode: str, rng: Optional[np.random.Generator] = None,
               features: tuple[int, int] = (64, 32), stride_position: str = STRIDE_LAST,
               in_channels: int = 1) -> "PrNParams":
        """Build the network; He-initialized when rng is given, all-zero otherwise"""
        check_mode(mode)
        if stride_position not in STRIDE_POSITIONS:
            raise ConfigurationError(f"stride_position must be one of {STRIDE_POSITIONS}, got {stride_position!r}")
        down = 2 if mode == MODE_CR else 1
        first_stride = down if stride_position == STRIDE_FIRST else 1
        last_stride = down if stride_position == STRIDE_LAST else 1

        params = cls(
            l1=ConvLayer.zeros(in_channels, features[0], stride=first_stride),
            l2=ConvLayer.zeros(features[0], features[1]),
            l3=ConvLayer.zeros(features[1], in_channels, stride=last_stride),
            mode=mode,
        )
        if rng is not None:
            for layer in params.layers():
                he_init(layer, rng)
        return params

    @property
    def stride_position(self) -> str:
        return STRIDE_FIRST if self.l1.stride == 2 else STRIDE_LAST

    def layers(self) -> list[ConvLayer]:
        return [self.l1, self.l2, self.l3]

    def params(self) -> list[np.ndarray]:
        return [arr for layer in self.layers() for arr in (layer.weights, layer.bias)]

    def load_params(self, arrays: list[np.ndarray]):
        layers = self.layers()
        if len(arrays) != 2 * len(layers):
            raise ConfigurationError(f"expected {2 * len(layers)} arrays, got {len(arrays)}")
        for i, layer in enumerate(layers):
            layer.weights = arrays[2 * i]
            layer.bias = arrays[2 * i + 1]

    def copy(self) -> "PrNParams":
        return PrNParams(self.l1.copy(), self.l2.copy(), self.l3.copy(), self.mode)


def prn_forward_raw(f: Tensor, params: PrNParams) -> tuple[Tensor, dict]:
    """Unclamped output plus the activations the backward pass needs"""
    x = as_tensor(f)
    if params.mode == MODE_CR and (x.shape[2] % 2 or x.shape[3] % 2):
        raise PreconditionError(f"CR mode needs even spatial dims, got {x.shape[2]}x{x.shape[3]}; prepare() the image first")
    a1 = conv2d_forward(x, params.l1)
    h1 = relu_forward(a1)
    a2 = conv2d_forward(h1, params.l2)
    h2 = relu_forward(a2)
    y = conv2d_forward(h2, params.l3)
    return y, {"x": x, "a1": a1, "h1": h1, "a2": a2, "h2": h2}


def prn_backward(params: PrNParams, cache: dict, grad_y: Tensor) -> tuple[Tensor, list[np.ndarray]]:
    """Gradient w.r.t. the input and w.r.t. params() in the same order"""
    g_h2, gw3, gb3 = conv2d_backward(cache["h2"], params.l3, grad_y)
    g_a2 = relu_backward(cache["a2"], g_h2)
    g_h1, gw2, gb2 = conv2d_backward(cache["h1"], params.l2, g_a2)
    g_a1 = relu_backward(cache["a1"], g_h1)
    g_x, gw1, gb1 = conv2d_backward(cache["x"], params.l1, g_a1)
    return g_x, [gw1, gb1, gw2, gb2, gw3, gb3]


def prn_forward(f: Tensor, params: PrNParams) -> Tensor:
    """Y = P_r(f, phi_1), clamped to [0, 1] for the codec hand-off"""
    y, _ = prn_forward_raw(f, params)
    return np.clip(y, 0.0, 1.0)
