"""
Post-processing network adapted from EDSR: head conv, residual trunk with
scaled skips, tail conv with a trunk-level skip, an optional x2 pixel-shuffle
upsampler (CR mode) and a one-channel output conv. The network predicts a
correction that is added to the input (FR) or to its nearest-neighbour x2
upsampling (CR).
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from errors import ConfigurationError
from models.common import MODE_CR, check_mode
from nn.tensor import (
    ConvLayer,
    Tensor,
    as_tensor,
    conv2d_backward,
    conv2d_forward,
    conv2d_input_grad,
    he_init,
    pixel_shuffle_x2,
    pixel_unshuffle_x2,
    relu_backward,
    relu_forward,
    upsample_nearest_x2,
    upsample_nearest_x2_backward,
)


@dataclass
class ResidualBlock:
    conv1: ConvLayer
    conv2: ConvLayer

    def copy(self) -> "ResidualBlock":
        return ResidualBlock(self.conv1.copy(), self.conv2.copy())


@dataclass
class PoNParams:
    """phi_2"""

    head: ConvLayer
    blocks: list[ResidualBlock]
    tail: ConvLayer
    final: ConvLayer
    mode: str
    res_scale: float = 0.1
    upsampler: Optional[ConvLayer] = field(default=None)

    @classmethod
    def create(cls, mode: str, rng: Optional[np.random.Generator] = None, features: int = 32,
               num_blocks: int = 4, res_scale: float = 0.1, in_channels: int = 1) -> "PoNParams":
        """Build the network; He-initialized when rng is given, all-zero otherwise"""
        check_mode(mode)
        if features < 1 or num_blocks < 0:
            raise ConfigurationError(f"invalid PoN size: features={features}, blocks={num_blocks}")
        params = cls(
            head=ConvLayer.zeros(in_channels, features),
            blocks=[
                ResidualBlock(ConvLayer.zeros(features, features), ConvLayer.zeros(features, features))
                for _ in range(num_blocks)
            ],
            tail=ConvLayer.zeros(features, features),
            final=ConvLayer.zeros(features, in_channels),
            mode=mode,
            res_scale=res_scale,
            upsampler=ConvLayer.zeros(features, 4 * features) if mode == MODE_CR else None,
        )
        if rng is not None:
            for layer in params.layers():
                he_init(layer, rng)
        return params

    @property
    def features(self) -> int:
        return self.head.out_channels

    def layers(self) -> list[ConvLayer]:
        out = [self.head]
        for block in self.blocks:
            out += [block.conv1, block.conv2]
        out.append(self.tail)
        if self.upsampler is not None:
            out.append(self.upsampler)
        out.append(self.final)
        return out

    def params(self) -> list[np.ndarray]:
        return [arr for layer in self.layers() for arr in (layer.weights, layer.bias)]

    def load_params(self, arrays: list[np.ndarray]):
        layers = self.layers()
        if len(arrays) != 2 * len(layers):
            raise ConfigurationError(f"expected {2 * len(layers)} arrays, got {len(arrays)}")
        for i, layer in enumerate(layers):
            layer.weights = arrays[2 * i]
            layer.bias = arrays[2 * i + 1]

    def copy(self) -> "PoNParams":
        return PoNParams(
            head=self.head.copy(),
            blocks=[block.copy() for block in self.blocks],
            tail=self.tail.copy(),
            final=self.final.copy(),
            mode=self.mode,
            res_scale=self.res_scale,
            upsampler=self.upsampler.copy() if self.upsampler is not None else None,
        )


def pon_forward_raw(x: Tensor, params: PoNParams) -> tuple[Tensor, dict]:
    """Unclamped reconstruction plus the activations the backward pass needs"""
    x = as_tensor(x)
    h0 = conv2d_forward(x, params.head)

    t = h0
    block_cache = []
    for block in params.blocks:
        u = conv2d_forward(t, block.conv1)
        v = relu_forward(u)
        w = conv2d_forward(v, block.conv2)
        block_cache.append((t, u, v))
        t = t + params.res_scale * w

    s = conv2d_forward(t, params.tail) + h0
    if params.mode == MODE_CR:
        z = pixel_shuffle_x2(conv2d_forward(s, params.upsampler))
        base = upsample_nearest_x2(x)
    else:
        z = s
        base = x

    out = base + conv2d_forward(z, params.final)
    return out, {"x": x, "blocks": block_cache, "trunk": t, "s": s, "z": z}


def _input_grad_only(x: Tensor, layer: ConvLayer, grad_out: Tensor) -> tuple[Tensor, None, None]:
    return conv2d_input_grad(x, layer, grad_out), None, None


def pon_backward(params: PoNParams, cache: dict, grad_out: Tensor,
                 with_params: bool = True) -> tuple[Tensor, list[np.ndarray]]:
    """
    Gradient w.r.t. the input and w.r.t. params() in the same order. With
    with_params=False only the input gradient is computed and the list is empty.
    """
    backward = conv2d_backward if with_params else _input_grad_only
    g_z, gw_final, gb_final = backward(cache["z"], params.final, grad_out)

    up_grads = []
    if params.mode == MODE_CR:
        g_base = upsample_nearest_x2_backward(grad_out)
        g_s, gw_up, gb_up = backward(cache["s"], params.upsampler, pixel_unshuffle_x2(g_z))
        up_grads = [gw_up, gb_up]
    else:
        g_base = grad_out
        g_s = g_z

    g_t, gw_tail, gb_tail = backward(cache["trunk"], params.tail, g_s)

    block_grads: list[list[np.ndarray]] = []
    for (t_in, u, v), block in zip(reversed(cache["blocks"]), reversed(params.blocks)):
        g_v, gw2, gb2 = backward(v, block.conv2, params.res_scale * g_t)
        g_u = relu_backward(u, g_v)
        g_t_in, gw1, gb1 = backward(t_in, block.conv1, g_u)
        g_t = g_t + g_t_in
        block_grads.insert(0, [gw1, gb1, gw2, gb2])

    g_x, gw_head, gb_head = backward(cache["x"], params.head, g_s + g_t)
    if not with_params:
        return g_x + g_base, []

    grads = [gw_head, gb_head]
    for item in block_grads:
        grads += item
    grads += [gw_tail, gb_tail] + up_grads + [gw_final, gb_final]
    return g_x + g_base, grads


def pon_forward(fc: Tensor, params: PoNParams) -> Tensor:
    """f_hat = P_o(f_hat_c, phi_2), clamped to [0, 1]"""
    out, _ = pon_forward_raw(fc, params)
    return np.clip(out, 0.0, 1.0)
