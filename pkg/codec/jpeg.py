"""
Grayscale baseline JPEG (sequential DCT, Annex K Huffman tables) encoder
and decoder. This is the in-loop codec C_o(., theta) and the source of the
rate: a bitstream's byte length defines bits per pixel.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Union

import numpy as np

from codec.bitio import BitReader, BitWriter
from codec.tables import (
    AC_LUMINANCE_BITS,
    AC_LUMINANCE_VALUES,
    DC_LUMINANCE_BITS,
    DC_LUMINANCE_VALUES,
    ZIGZAG,
    CodecConfig,
    QuantTable,
    huffman_codes,
    quant_table_for,
)
from codec.transform import BLOCK, quantize_blocks, reconstruct_blocks, to_samples
from errors import ConfigurationError, IngestionError, ParseError, PreconditionError, UnsupportedModeError

SOI = 0xD8
EOI = 0xD9
SOF0 = 0xC0
DHT = 0xC4
DQT = 0xDB
DRI = 0xDD
SOS = 0xDA
APP0 = 0xE0
# every SOFn except baseline; C4, C8 and CC are DHT, JPG and DAC
UNSUPPORTED_SOF = {0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}

_DC_CODES = huffman_codes(DC_LUMINANCE_BITS, DC_LUMINANCE_VALUES)
_AC_CODES = huffman_codes(AC_LUMINANCE_BITS, AC_LUMINANCE_VALUES)


@dataclass(frozen=True)
class Bitstream:
    """Serialized JFIF bytes"""

    data: bytes

    @property
    def bit_length(self) -> int:
        return 8 * len(self.data)

    def __len__(self) -> int:
        return len(self.data)


class Codec(Protocol):
    """Anything that can sit between the two networks"""

    name: str

    def encode(self, img: np.ndarray) -> Bitstream: ...

    def decode(self, bs: Bitstream) -> np.ndarray: ...


class JpegCodec:
    def __init__(self, qf: int):
        self.config = CodecConfig(qf)
        self.name = f"jpeg-q{qf}"

    def encode(self, img: np.ndarray) -> Bitstream:
        return encode(img, self.config)

    def decode(self, bs: Bitstream) -> np.ndarray:
        return decode(bs)


def _image_2d(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 4 and arr.shape[:2] == (1, 1):
        arr = arr[0, 0]
    if arr.ndim != 2:
        raise ConfigurationError(f"codec takes a single-channel image, got shape {arr.shape}")
    if arr.size == 0:
        raise PreconditionError("cannot encode an empty image")
    return arr


def reference_roundtrip(img: np.ndarray, cfg: CodecConfig) -> np.ndarray:
    """Quantize/dequantize pipeline without entropy coding"""
    arr = _image_2d(img)
    table = quant_table_for(cfg.qf).natural
    quantized = quantize_blocks(to_samples(arr), table)
    return reconstruct_blocks(quantized, table, *arr.shape) / 255.0


# ---- encoder ----

def _segment(marker: int, payload: bytes) -> bytes:
    return struct.pack(">BBH", 0xFF, marker, len(payload) + 2) + payload


def _headers(height: int, width: int, table: QuantTable) -> bytes:
    out = struct.pack(">BB", 0xFF, SOI)
    out += _segment(APP0, b"JFIF\x00" + struct.pack(">BBBHHBB", 1, 1, 0, 1, 1, 0, 0))
    out += _segment(DQT, bytes([0x00]) + bytes(table.values))
    out += _segment(SOF0, struct.pack(">BHHB", 8, height, width, 1) + bytes([1, 0x11, 0]))
    dht = bytes([0x00]) + bytes(DC_LUMINANCE_BITS) + bytes(DC_LUMINANCE_VALUES)
    dht += bytes([0x10]) + bytes(AC_LUMINANCE_BITS) + bytes(AC_LUMINANCE_VALUES)
    out += _segment(DHT, dht)
    out += _segment(SOS, bytes([1, 1, 0x00, 0, 63, 0]))
    return out


def _amplitude(value: int, size: int) -> int:
    return value if value > 0 else value + (1 << size) - 1


def _encode_scan(zigzag_blocks: list[list[int]]) -> bytes:
    writer = BitWriter()
    pred = 0
    for block in zigzag_blocks:
        diff = block[0] - pred
        pred = block[0]
        size = abs(diff).bit_length()
        writer.write(*_DC_CODES[size])
        writer.write(_amplitude(diff, size), size)

        run = 0
        for k in range(1, 64):
            value = block[k]
            if value == 0:
                run += 1
                continue
            while run > 15:
                writer.write(*_AC_CODES[0xF0])
                run -= 16
            size = abs(value).bit_length()
            writer.write(*_AC_CODES[(run << 4) | size])
            writer.write(_amplitude(value, size), size)
            run = 0
        if run:
            writer.write(*_AC_CODES[0x00])
    return writer.flush()


def encode(img: np.ndarray, cfg: CodecConfig) -> Bitstream:
    """Encode a [0, 1] grayscale image as a baseline JFIF stream"""
    arr = _image_2d(img)
    height, width = arr.shape
    if height > 0xFFFF or width > 0xFFFF:
        raise PreconditionError(f"image {height}x{width} exceeds JPEG dimension limits")
    table = quant_table_for(cfg.qf)
    quantized = quantize_blocks(to_samples(arr), table.natural)
    zigzag = quantized.reshape(-1, 64)[:, ZIGZAG].tolist()
    data = _headers(height, width, table) + _encode_scan(zigzag) + struct.pack(">BB", 0xFF, EOI)
    return Bitstream(data)


# ---- decoder ----

@dataclass
class _Frame:
    height: int
    width: int
    quant_id: int


def _huffman_lookup(bits, values) -> dict[tuple[int, int], int]:
    return {(length, code): symbol for symbol, (code, length) in huffman_codes(bits, values).items()}


def _decode_symbol(reader: BitReader, lookup: dict) -> int:
    code = 0
    for length in range(1, 17):
        code = (code << 1) | reader.read_bit()
        symbol = lookup.get((length, code))
        if symbol is not None:
            return symbol
    raise ParseError("invalid Huffman code", reader.pos)


def _extend(value: int, size: int) -> int:
    return value - (1 << size) + 1 if value < (1 << (size - 1)) else value


def _decode_scan(reader: BitReader, nblocks: int, dc_lookup: dict, ac_lookup: dict) -> np.ndarray:
    coeffs = np.zeros((nblocks, 64), dtype=np.int64)
    pred = 0
    for b in range(nblocks):
        size = _decode_symbol(reader, dc_lookup)
        if size > 11:
            raise ParseError(f"DC category {size} out of range", reader.pos)
        pred += _extend(reader.read_bits(size), size) if size else 0
        coeffs[b, 0] = pred
        k = 1
        while k < 64:
            rs = _decode_symbol(reader, ac_lookup)
            run, size = rs >> 4, rs & 0x0F
            if size == 0:
                if run == 15:
                    k += 16
                    continue
                break
            k += run
            if k > 63:
                raise ParseError("AC coefficient index past end of block", reader.pos)
            coeffs[b, k] = _extend(reader.read_bits(size), size)
            k += 1
    return coeffs


def decode(bs: Union[Bitstream, bytes]) -> np.ndarray:
    """Decode a grayscale baseline stream to a [0, 1] image at its stored dims"""
    data = bs.data if isinstance(bs, Bitstream) else bytes(bs)
    if len(data) < 4 or data[0] != 0xFF or data[1] != SOI:
        raise ParseError("missing SOI marker", 0)

    qtables: dict[int, np.ndarray] = {}
    dc_tables: dict[int, dict] = {}
    ac_tables: dict[int, dict] = {}
    frame = None
    pos = 2

    while True:
        if pos + 2 > len(data):
            raise ParseError("stream ended before a scan was decoded", pos)
        if data[pos] != 0xFF:
            raise ParseError("expected a marker", pos)
        marker = data[pos + 1]
        if marker == 0xFF:
            pos += 1
            continue
        marker_pos = pos
        pos += 2
        if marker == EOI:
            raise ParseError("EOI before any scan", marker_pos)
        if marker in UNSUPPORTED_SOF:
            raise UnsupportedModeError(f"unsupported mode SOF{marker - SOF0}", marker_pos)
        if marker == DRI:
            raise UnsupportedModeError("unsupported mode: restart intervals", marker_pos)

        if pos + 2 > len(data):
            raise ParseError("truncated segment length", pos)
        length = struct.unpack(">H", data[pos:pos + 2])[0]
        if length < 2 or pos + length > len(data):
            raise ParseError("truncated segment", pos)
        payload = data[pos + 2:pos + length]
        seg_start = pos
        pos += length

        if marker == DQT:
            _parse_dqt(payload, seg_start, qtables)
        elif marker == DHT:
            _parse_dht(payload, seg_start, dc_tables, ac_tables)
        elif marker == SOF0:
            frame = _parse_sof0(payload, seg_start)
        elif marker == SOS:
            return _decode_image(data, pos, payload, seg_start, frame, qtables, dc_tables, ac_tables)


def _parse_dqt(payload: bytes, offset: int, qtables: dict):
    i = 0
    while i < len(payload):
        pq, tq = payload[i] >> 4, payload[i] & 0x0F
        if pq != 0:
            raise UnsupportedModeError("unsupported mode: 16-bit quantization table", offset + i)
        if i + 65 > len(payload):
            raise ParseError("truncated DQT segment", offset + i)
        qtables[tq] = QuantTable(tuple(payload[i + 1:i + 65])).natural
        i += 65


def _parse_dht(payload: bytes, offset: int, dc_tables: dict, ac_tables: dict):
    i = 0
    while i < len(payload):
        if i + 17 > len(payload):
            raise ParseError("truncated DHT segment", offset + i)
        tc, th = payload[i] >> 4, payload[i] & 0x0F
        bits = tuple(payload[i + 1:i + 17])
        count = sum(bits)
        if i + 17 + count > len(payload):
            raise ParseError("truncated DHT segment", offset + i)
        values = tuple(payload[i + 17:i + 17 + count])
        (ac_tables if tc else dc_tables)[th] = _huffman_lookup(bits, values)
        i += 17 + count


def _parse_sof0(payload: bytes, offset: int) -> _Frame:
    if len(payload) < 6:
        raise ParseError("truncated SOF0 segment", offset)
    precision, height, width, ncomp = struct.unpack(">BHHB", payload[:6])
    if precision != 8:
        raise UnsupportedModeError(f"unsupported mode: {precision}-bit samples", offset)
    if ncomp != 1:
        raise UnsupportedModeError(f"unsupported mode: {ncomp} color components", offset)
    if height == 0 or width == 0:
        raise UnsupportedModeError("unsupported mode: deferred frame height", offset)
    if len(payload) < 9:
        raise ParseError("truncated SOF0 component", offset)
    return _Frame(height=height, width=width, quant_id=payload[8] & 0x0F)


def _decode_image(data: bytes, pos: int, payload: bytes, offset: int, frame,
                  qtables: dict, dc_tables: dict, ac_tables: dict) -> np.ndarray:
    if frame is None:
        raise ParseError("SOS before SOF0", offset)
    if len(payload) < 6 or payload[0] != 1:
        raise UnsupportedModeError("unsupported mode: multi-component scan", offset)
    td, ta = payload[2] >> 4, payload[2] & 0x0F
    if tuple(payload[3:6]) != (0, 63, 0):
        raise UnsupportedModeError("unsupported mode: spectral selection or approximation", offset)
    if frame.quant_id not in qtables:
        raise ParseError(f"missing quantization table {frame.quant_id}", offset)
    if td not in dc_tables or ta not in ac_tables:
        raise ParseError("missing Huffman table", offset)

    nby = -(-frame.height // BLOCK)
    nbx = -(-frame.width // BLOCK)
    reader = BitReader(data, pos)
    coeffs = _decode_scan(reader, nby * nbx, dc_tables[td], ac_tables[ta])

    end = reader.pos
    while end < len(data) and data[end] == 0xFF and end + 1 < len(data) and data[end + 1] == 0xFF:
        end += 1
    if end + 2 > len(data) or data[end] != 0xFF or data[end + 1] != EOI:
        raise ParseError("missing EOI after scan", end)

    natural = np.zeros_like(coeffs)
    natural[:, ZIGZAG] = coeffs
    samples = reconstruct_blocks(natural.reshape(nby, nbx, BLOCK, BLOCK), qtables[frame.quant_id],
                                 frame.height, frame.width)
    logging.debug(f"decoded {frame.width}x{frame.height} JPEG, {len(data)} bytes")
    return samples / 255.0


def bits_per_pixel(bs: Bitstream, original_dims: tuple[int, int]) -> float:
    """8 * bytes / (h * w) of the original, pre-processing image"""
    height, width = original_dims
    if height <= 0 or width <= 0:
        raise PreconditionError(f"original dims must have positive area, got {original_dims}")
    return 8.0 * len(bs.data) / (height * width)


def write_jpeg(path: Union[str, Path], bs: Bitstream):
    Path(path).write_bytes(bs.data)


def read_jpeg(path: Union[str, Path]) -> Bitstream:
    try:
        return Bitstream(Path(path).read_bytes())
    except OSError as e:
        raise IngestionError(path, f"cannot read JPEG file ({e.strerror})") from e
