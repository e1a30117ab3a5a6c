"""
Non-entropy half of the codec: sample conversion, 8x8 block tiling,
orthonormal DCT, quantization and reconstruction. Both the encoder and the
reference round-trip go through these functions so they agree bit for bit.
"""
import numpy as np
from scipy import fft

BLOCK = 8

# coefficient ranges the baseline Huffman categories can code
DC_RANGE = (-1024, 1023)
AC_LIMIT = 1023


def to_samples(img: np.ndarray) -> np.ndarray:
    """[0, 1] floats -> 8-bit sample values as int64"""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.int64)


def pad_to_blocks(samples: np.ndarray) -> np.ndarray:
    h, w = samples.shape
    pad_h = -h % BLOCK
    pad_w = -w % BLOCK
    if pad_h or pad_w:
        samples = np.pad(samples, ((0, pad_h), (0, pad_w)), mode="edge")
    return samples


def split_blocks(arr: np.ndarray) -> np.ndarray:
    """(H, W) with H, W multiples of 8 -> (H/8, W/8, 8, 8)"""
    h, w = arr.shape
    return arr.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def merge_blocks(blocks: np.ndarray) -> np.ndarray:
    nby, nbx = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(nby * BLOCK, nbx * BLOCK)


def fdct8x8(block: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II over the last two axes; a constant v gives DC = 8v"""
    return fft.dctn(np.asarray(block, dtype=np.float64), type=2, norm="ortho", axes=(-2, -1))


def idct8x8(coef: np.ndarray) -> np.ndarray:
    return fft.idctn(np.asarray(coef, dtype=np.float64), type=2, norm="ortho", axes=(-2, -1))


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_blocks(samples: np.ndarray, table_natural: np.ndarray) -> np.ndarray:
    """Level-shift, transform and quantize; returns int64 (nby, nbx, 8, 8)"""
    coef = fdct8x8(split_blocks(pad_to_blocks(samples).astype(np.float64) - 128.0))
    q = round_half_away(coef / table_natural).astype(np.int64)
    dc = np.clip(q[..., 0, 0], *DC_RANGE)
    q = np.clip(q, -AC_LIMIT, AC_LIMIT)
    q[..., 0, 0] = dc
    return q


def reconstruct_blocks(quantized: np.ndarray, table_natural: np.ndarray, height: int, width: int) -> np.ndarray:
    """Dequantize, inverse transform, unshift, clamp and crop to 8-bit samples"""
    pixels = idct8x8(quantized * table_natural) + 128.0
    samples = np.clip(np.floor(pixels + 0.5), 0, 255).astype(np.int64)
    return merge_blocks(samples)[:height, :width]
