"""
Baseline JPEG constants (ITU-T T.81 Annex K) and quality-factor scaling
"""
from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError

# natural (row-major) order
BASE_LUMINANCE_TABLE = (
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
)

# ZIGZAG[k] is the natural index of the k-th coefficient in zigzag order
ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.intp)

DC_LUMINANCE_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
DC_LUMINANCE_VALUES = tuple(range(12))

AC_LUMINANCE_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
AC_LUMINANCE_VALUES = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08, 0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)


@dataclass(frozen=True)
class CodecConfig:
    """JPEG quality factor theta in [1, 100]"""

    qf: int

    def __post_init__(self):
        if isinstance(self.qf, bool) or not isinstance(self.qf, (int, np.integer)) or not 1 <= self.qf <= 100:
            raise ConfigurationError(f"quality factor must be an integer in [1, 100], got {self.qf!r}")


@dataclass(frozen=True)
class QuantTable:
    """64 quantizer steps in zigzag order, as written to DQT"""

    values: tuple[int, ...]

    @property
    def natural(self) -> np.ndarray:
        out = np.empty(64, dtype=np.int64)
        out[ZIGZAG] = self.values
        return out.reshape(8, 8)

    @classmethod
    def from_natural(cls, table) -> "QuantTable":
        flat = np.asarray(table, dtype=np.int64).reshape(64)
        return cls(tuple(int(v) for v in flat[ZIGZAG]))


def quant_table_for(qf: int) -> QuantTable:
    """
    IJG quality scaling of the Annex K luminance table. The scale below 50
    is the integer 5000 // qf, as in libjpeg's jpeg_quality_scaling.
    """
    CodecConfig(qf)
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    base = np.array(BASE_LUMINANCE_TABLE, dtype=np.int64)
    scaled = np.clip((base * scale + 50) // 100, 1, 255)
    return QuantTable.from_natural(scaled)


def huffman_codes(bits, values) -> dict[int, tuple[int, int]]:
    """symbol -> (code, length) from BITS/HUFFVAL (T.81 Annex C)"""
    codes = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[values[k]] = (code, length)
            code += 1
            k += 1
        code <<= 1
    return codes
