"""
Dense 4-D tensors (batch, channels, height, width) and the layer kernels
both networks are built from: reflect-padded 3x3 convolution, ReLU and the
x2 pixel shuffle. Every kernel has an explicit backward pass.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import ConfigurationError

Tensor = np.ndarray

KERNEL_SIZE = 3


def as_tensor(x) -> Tensor:
    """Coerce to a float64 (b, c, h, w) array"""
    t = np.asarray(x, dtype=np.float64)
    if t.ndim != 4:
        raise ConfigurationError(f"expected a 4-D tensor, got shape {t.shape}")
    return t


@dataclass
class ConvLayer:
    """3x3 convolution with per-output-channel bias and stride 1 or 2"""

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 4 or self.weights.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ConfigurationError(f"conv weights must be (out, in, 3, 3), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ConfigurationError(f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} filters")
        if self.stride not in (1, 2):
            raise ConfigurationError(f"stride must be 1 or 2, got {self.stride}")

    @classmethod
    def zeros(cls, in_channels: int, out_channels: int, stride: int = 1) -> "ConvLayer":
        return cls(
            weights=np.zeros((out_channels, in_channels, KERNEL_SIZE, KERNEL_SIZE)),
            bias=np.zeros(out_channels),
            stride=stride,
        )

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_in(self) -> int:
        return self.in_channels * KERNEL_SIZE * KERNEL_SIZE

    def num_params(self) -> int:
        return self.weights.size + self.bias.size

    def copy(self) -> "ConvLayer":
        return ConvLayer(self.weights.copy(), self.bias.copy(), self.stride)


def seed_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for weight init and batch shuffling"""
    return np.random.default_rng(seed)


def he_init(layer: ConvLayer, rng: np.random.Generator) -> ConvLayer:
    """He-uniform weights in +-sqrt(6 / fan_in), zero bias"""
    bound = np.sqrt(6.0 / layer.fan_in)
    layer.weights = rng.uniform(-bound, bound, size=layer.weights.shape)
    layer.bias = np.zeros_like(layer.bias)
    return layer


def _output_dims(height: int, width: int, stride: int) -> tuple[int, int]:
    return -(-height // stride), -(-width // stride)


def _reflect_index(n: int) -> np.ndarray:
    # mirror without repeating the edge sample; a singleton axis can only repeat
    if n == 1:
        return np.zeros(3, dtype=np.intp)
    return np.concatenate(([1], np.arange(n), [n - 2])).astype(np.intp)


def _pad(x: Tensor) -> Tensor:
    _, _, h, w = x.shape
    return np.take(np.take(x, _reflect_index(h), axis=2), _reflect_index(w), axis=3)


def _fold_axis(g: np.ndarray, n: int, axis: int) -> np.ndarray:
    g = np.moveaxis(g, axis, 0)
    if n == 1:
        out = g[0:1] + g[1:2] + g[2:3]
    else:
        out = g[1:n + 1].copy()
        out[1] += g[0]
        out[n - 2] += g[n + 1]
    return np.moveaxis(out, 0, axis)


def _pad_backward(grad_padded: Tensor, height: int, width: int) -> Tensor:
    return _fold_axis(_fold_axis(grad_padded, height, 2), width, 3)


def _check_input(x: Tensor, layer: ConvLayer):
    n, c, h, w = x.shape
    if c != layer.in_channels:
        raise ConfigurationError(f"input has {c} channels, layer expects {layer.in_channels}")
    if h < 1 or w < 1:
        raise ConfigurationError(f"spatial dims must be >= 1, got {h}x{w}")


def _windows(padded: Tensor, stride: int) -> np.ndarray:
    # (n, c, h, w, 3, 3) read-only view, then subsampled by the stride
    win = sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(x: Tensor, layer: ConvLayer) -> Tensor:
    """'Same' reflect-padded convolution; output dims are ceil(in / stride)"""
    x = as_tensor(x)
    _check_input(x, layer)
    win = _windows(_pad(x), layer.stride)
    out = np.tensordot(win, layer.weights, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + layer.bias[None, :, None, None]
    return np.ascontiguousarray(out)


def _checked_grad(x: Tensor, layer: ConvLayer, grad_out: Tensor) -> np.ndarray:
    n, _, h, w = x.shape
    out_h, out_w = _output_dims(h, w, layer.stride)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (n, layer.out_channels, out_h, out_w):
        raise ConfigurationError(
            f"grad_out shape {grad_out.shape} does not match forward output {(n, layer.out_channels, out_h, out_w)}"
        )
    return grad_out


def conv2d_input_grad(x: Tensor, layer: ConvLayer, grad_out: Tensor) -> Tensor:
    """Gradient of a scalar loss w.r.t. the input only"""
    x = as_tensor(x)
    _check_input(x, layer)
    grad_out = _checked_grad(x, layer, grad_out)
    n, c, h, w = x.shape
    s = layer.stride
    out_h, out_w = grad_out.shape[2:]
    grad_padded = np.zeros((n, c, h + 2, w + 2))
    for i in range(KERNEL_SIZE):
        for j in range(KERNEL_SIZE):
            contrib = np.tensordot(grad_out, layer.weights[:, :, i, j], axes=([1], [0]))
            grad_padded[:, :, i:i + s * out_h:s, j:j + s * out_w:s] += contrib.transpose(0, 3, 1, 2)
    return _pad_backward(grad_padded, h, w)


def conv2d_backward(x: Tensor, layer: ConvLayer, grad_out: Tensor) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. (input, weights, bias)"""
    x = as_tensor(x)
    _check_input(x, layer)
    grad_out = _checked_grad(x, layer, grad_out)
    win = _windows(_pad(x), layer.stride)
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_weights = np.tensordot(grad_out, win, axes=([0, 2, 3], [0, 2, 3]))
    return conv2d_input_grad(x, layer, grad_out), grad_weights, grad_bias


def relu_forward(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def relu_backward(x: Tensor, grad_out: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    return grad_out * (x > 0)


def pixel_shuffle_x2(x: Tensor) -> Tensor:
    """(b, 4c, h, w) -> (b, c, 2h, 2w); channels 4k..4k+3 fill TL, TR, BL, BR"""
    x = as_tensor(x)
    b, c4, h, w = x.shape
    if c4 % 4:
        raise ConfigurationError(f"pixel shuffle needs channels divisible by 4, got {c4}")
    c = c4 // 4
    return x.reshape(b, c, 2, 2, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(b, c, 2 * h, 2 * w)


def pixel_unshuffle_x2(x: Tensor) -> Tensor:
    """Inverse of pixel_shuffle_x2, also its backward pass"""
    x = as_tensor(x)
    b, c, h2, w2 = x.shape
    if h2 % 2 or w2 % 2:
        raise ConfigurationError(f"pixel unshuffle needs even spatial dims, got {h2}x{w2}")
    h, w = h2 // 2, w2 // 2
    return x.reshape(b, c, h, 2, w, 2).transpose(0, 1, 3, 5, 2, 4).reshape(b, 4 * c, h, w)


def upsample_nearest_x2(x: Tensor) -> Tensor:
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample_nearest_x2_backward(grad_out: Tensor) -> Tensor:
    b, c, h2, w2 = grad_out.shape
    return grad_out.reshape(b, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
