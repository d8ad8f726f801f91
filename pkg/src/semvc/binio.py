"""Little-endian field readers/writers and LEB128 varints."""
from __future__ import annotations

import struct

__all__ = ["FormatError", "Writer", "Reader"]


class FormatError(ValueError):
    pass


_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_I16 = struct.Struct("<h")
_U32 = struct.Struct("<I")


class Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, v: int) -> None:
        self.buf += _U8.pack(v)

    def u16(self, v: int) -> None:
        self.buf += _U16.pack(v)

    def i16(self, v: int) -> None:
        self.buf += _I16.pack(v)

    def u32(self, v: int) -> None:
        self.buf += _U32.pack(v)

    def varint(self, v: int) -> None:
        if v < 0:
            raise ValueError("varint must be non-negative")
        while True:
            byte = v & 0x7F
            v >>= 7
            if v:
                self.buf.append(byte | 0x80)
            else:
                self.buf.append(byte)
                return

    def raw(self, data: bytes) -> None:
        self.buf += data

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def _take(self, st: struct.Struct) -> int:
        end = self.pos + st.size
        if end > len(self.data):
            raise FormatError(f"unexpected end of data at byte {self.pos}")
        (v,) = st.unpack_from(self.data, self.pos)
        self.pos = end
        return v

    def u8(self) -> int:
        return self._take(_U8)

    def u16(self) -> int:
        return self._take(_U16)

    def i16(self) -> int:
        return self._take(_I16)

    def u32(self) -> int:
        return self._take(_U32)

    def varint(self) -> int:
        v = 0
        shift = 0
        while True:
            if self.pos >= len(self.data):
                raise FormatError(f"unexpected end of data in varint at byte {self.pos}")
            byte = self.data[self.pos]
            self.pos += 1
            v |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return v
            shift += 7
            if shift > 63:
                raise FormatError("varint longer than 64 bits")

    def raw(self, n: int) -> bytes:
        end = self.pos + n
        if n < 0 or end > len(self.data):
            raise FormatError(f"unexpected end of data at byte {self.pos}")
        out = self.data[self.pos : end]
        self.pos = end
        return out

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos
