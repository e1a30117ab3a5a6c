"""
Entropy-coded segment bit packing with 0xFF byte stuffing
"""
from errors import ParseError


class BitWriter:
    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, value: int, length: int):
        if length == 0:
            return
        self._acc = (self._acc << length) | (value & ((1 << length) - 1))
        self._nbits += length
        while self._nbits >= 8:
            self._nbits -= 8
            byte = (self._acc >> self._nbits) & 0xFF
            self._out.append(byte)
            if byte == 0xFF:
                self._out.append(0x00)
        self._acc &= (1 << self._nbits) - 1

    def flush(self) -> bytes:
        """Pad the last byte with 1-bits and return the segment"""
        if self._nbits:
            fill = 8 - self._nbits
            self.write((1 << fill) - 1, fill)
        return bytes(self._out)


class BitReader:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos
        self._acc = 0
        self._nbits = 0

    def _fill(self):
        data, pos = self.data, self.pos
        if pos >= len(data):
            raise ParseError("truncated entropy-coded data", pos)
        byte = data[pos]
        if byte == 0xFF:
            if pos + 1 >= len(data):
                raise ParseError("truncated entropy-coded data", pos)
            if data[pos + 1] != 0x00:
                raise ParseError("marker inside entropy-coded data", pos)
            self.pos = pos + 2
        else:
            self.pos = pos + 1
        self._acc = (self._acc << 8) | byte
        self._nbits += 8

    def read_bit(self) -> int:
        if self._nbits == 0:
            self._fill()
        self._nbits -= 1
        bit = (self._acc >> self._nbits) & 1
        self._acc &= (1 << self._nbits) - 1
        return bit

    def read_bits(self, length: int) -> int:
        while self._nbits < length:
            self._fill()
        self._nbits -= length
        value = self._acc >> self._nbits
        self._acc &= (1 << self._nbits) - 1
        return value
