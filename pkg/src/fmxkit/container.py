"""FMX container (the outermost layer): a 32-byte header followed by the payload.

Layout shared by both header profiles::

    0x00  magic    b"FMX\\x01"
    0x04  version  u32 LE
    0x08  size     u32 LE   (MAIN_TEXT: stored payload length + 12;
                             APPENDIX_CHECKSUM: flags)
    0x0C  tail     20 bytes (MAIN_TEXT: seed material;
                             APPENDIX_CHECKSUM: original size u32 LE + MD5)
    0x20  payload
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import InvalidHeader, NotFmx, Truncated

MAGIC = b"FMX\x01"
HEADER_SIZE = 32
TAIL_SIZE = 20
SIZE_OVERHEAD = 12

_PREFIX = struct.Struct("<4sII")
_U32_MAX = 0xFFFFFFFF


class HeaderProfile(enum.Enum):
    MAIN_TEXT = "main"
    APPENDIX_CHECKSUM = "appendix"


@dataclass(frozen=True)
class FmxHeader:
    version: int
    size_field: int
    tail: bytes = bytes(TAIL_SIZE)
    profile: HeaderProfile = HeaderProfile.MAIN_TEXT
    magic: bytes = MAGIC

    @classmethod
    def main_text(cls, version: int, payload_len: int, seed_material: bytes = b"") -> FmxHeader:
        if len(seed_material) > TAIL_SIZE:
            raise InvalidHeader(f"seed material longer than {TAIL_SIZE} bytes")
        return cls(version, payload_len + SIZE_OVERHEAD,
                   seed_material.ljust(TAIL_SIZE, b"\x00"), HeaderProfile.MAIN_TEXT)

    @classmethod
    def appendix(cls, version: int, flags: int, original_size: int,
                 checksum: bytes = bytes(16)) -> FmxHeader:
        if len(checksum) != 16:
            raise InvalidHeader("checksum must be 16 bytes")
        _check_u32("original_size", original_size)
        return cls(version, flags, struct.pack("<I", original_size) + checksum,
                   HeaderProfile.APPENDIX_CHECKSUM)

    # APPENDIX_CHECKSUM views; the flags word occupies the size slot
    @property
    def flags(self) -> int:
        return self.size_field

    @property
    def original_size(self) -> int:
        return struct.unpack_from("<I", self.tail, 0)[0]

    @property
    def checksum(self) -> bytes:
        return self.tail[4:20]

    def payload_consistent(self, payload_len: int) -> bool:
        """True when the size slot follows the +12 rule (MAIN_TEXT only)."""
        return self.size_field == payload_len + SIZE_OVERHEAD

    def validate(self) -> None:
        if self.magic != MAGIC:
            raise InvalidHeader(f"bad magic {self.magic!r}")
        _check_u32("version", self.version)
        _check_u32("size_field", self.size_field)
        if len(self.tail) != TAIL_SIZE:
            raise InvalidHeader(f"tail must be {TAIL_SIZE} bytes, got {len(self.tail)}")


@dataclass(frozen=True)
class FmxContainer:
    header: FmxHeader
    payload: bytes

    def to_bytes(self) -> bytes:
        return serialize_header(self.header) + self.payload


def _check_u32(name: str, value: int) -> None:
    if not isinstance(value, int) or not 0 <= value <= _U32_MAX:
        raise InvalidHeader(f"{name} must be an unsigned 32-bit integer, got {value!r}")


def detect(data: bytes) -> bool:
    return data[:4] == MAGIC


def parse_header(data: bytes, profile: HeaderProfile = HeaderProfile.MAIN_TEXT) -> FmxHeader:
    if not detect(data):
        if len(data) < 4 and MAGIC.startswith(bytes(data)):
            raise Truncated(f"{len(data)} bytes is shorter than the header")
        raise NotFmx("missing FMX magic")
    if len(data) < HEADER_SIZE:
        raise Truncated(f"{len(data)} bytes is shorter than the {HEADER_SIZE}-byte header")
    magic, version, size_field = _PREFIX.unpack_from(data, 0)
    return FmxHeader(version, size_field, bytes(data[12:HEADER_SIZE]), profile, magic)


def serialize_header(header: FmxHeader) -> bytes:
    header.validate()
    return _PREFIX.pack(header.magic, header.version, header.size_field) + header.tail


def unwrap(data: bytes, profile: HeaderProfile = HeaderProfile.MAIN_TEXT) -> FmxContainer:
    header = parse_header(data, profile)
    return FmxContainer(header, bytes(data[HEADER_SIZE:]))


def wrap_payload(header: FmxHeader, payload: bytes) -> bytes:
    return serialize_header(header) + payload
