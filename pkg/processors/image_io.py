"""
Netpbm (PGM/PPM) reading and writing. PPM is reduced to luminance with
BT.601 weights; everything is returned as float64 in [0, 1].
"""
from pathlib import Path
from typing import Union

import aiofiles
import numpy as np

from errors import IngestionError

PathLike = Union[str, Path]

BT601 = (0.299, 0.587, 0.114)
_MAGICS = {b"P2": (1, False), b"P3": (3, False), b"P5": (1, True), b"P6": (3, True)}


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise ValueError("truncated header")
        tokens.append(data[start:i])
    # exactly one whitespace byte separates the header from a binary raster
    return tokens, i + 1


def parse_netpbm(data: bytes, path: PathLike = "<bytes>") -> np.ndarray:
    """Decode P2/P3/P5/P6 bytes to a 2-D luminance array in [0, 1]"""
    try:
        tokens, offset = _header_tokens(data, 4)
        magic = tokens[0]
        if magic not in _MAGICS:
            raise ValueError(f"unsupported netpbm magic {magic!r}")
        channels, binary = _MAGICS[magic]
        width, height, maxval = (int(t) for t in tokens[1:])
        if width < 1 or height < 1 or not 0 < maxval < 65536:
            raise ValueError(f"invalid header {width}x{height} maxval {maxval}")
        count = width * height * channels
        if binary:
            dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
            raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        else:
            raw = np.array([int(t) for t in data[offset - 1:].split()[:count]], dtype=np.int64)
            if raw.size != count:
                raise ValueError("truncated raster")
    except ValueError as e:
        raise IngestionError(path, f"not a readable PGM/PPM file ({e})") from e

    pixels = raw.astype(np.float64).reshape(height, width, channels) / maxval
    if channels == 3:
        return pixels @ np.array(BT601)
    return pixels[:, :, 0]


def encode_pgm(img: np.ndarray) -> bytes:
    """8-bit binary P5 bytes for a [0, 1] image"""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise IngestionError("<array>", f"PGM output needs a 2-D image, got shape {arr.shape}")
    samples = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    height, width = samples.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + samples.tobytes()


def read_image(path: PathLike) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IngestionError(path, f"cannot read file ({e.strerror})") from e
    return parse_netpbm(data, path)


def write_pgm(path: PathLike, img: np.ndarray):
    Path(path).write_bytes(encode_pgm(img))


async def read_image_async(path: PathLike) -> np.ndarray:
    """Read with aiofiles so many images can load concurrently"""
    try:
        async with aiofiles.open(path, "rb") as f:
            data = await f.read()
    except OSError as e:
        raise IngestionError(path, f"cannot read file ({e.strerror})") from e
    return parse_netpbm(data, path)


async def write_bytes_async(path: PathLike, data: bytes):
    async with aiofiles.open(path, "wb") as f:
        await f.write(data)


async def write_text_async(path: PathLike, text: str):
    async with aiofiles.open(path, "w", encoding="utf-8") as f:
        await f.write(text)
