"""MSB-first bit packing over a byte buffer."""

from .errors import StreamFormatError


class BitWriter:
    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, value: int, nbits: int) -> None:
        if value < 0 or value >= (1 << nbits):
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._nbits += nbits
        while self._nbits >= 8:
            self._nbits -= 8
            self._out.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def align(self) -> None:
        """Pad with zero bits to the next byte boundary."""
        if self._nbits:
            self.write(0, 8 - self._nbits)

    def getvalue(self) -> bytes:
        if self._nbits:
            raise ValueError("unaligned bitstream; call align() first")
        return bytes(self._out)


class BitReader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0  # bit position

    def read(self, nbits: int) -> int:
        end = self._pos + nbits
        if end > 8 * len(self._data):
            raise StreamFormatError("bitstream truncated")
        value = 0
        pos = self._pos
        while nbits:
            byte = self._data[pos >> 3]
            offset = pos & 7
            take = min(8 - offset, nbits)
            chunk = (byte >> (8 - offset - take)) & ((1 << take) - 1)
            value = (value << take) | chunk
            pos += take
            nbits -= take
        self._pos = pos
        return value

    def align(self) -> None:
        self._pos = (self._pos + 7) & ~7

    @property
    def byte_pos(self) -> int:
        if self._pos & 7:
            raise ValueError("reader is not byte-aligned")
        return self._pos >> 3
