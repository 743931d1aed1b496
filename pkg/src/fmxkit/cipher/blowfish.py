"""Blowfish (64-bit block, 16 rounds) and ECB mode with selectable padding.

Feistel halves are read big-endian, as in the reference definition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import Alignment, BlockSize, KeyLength
from . import _kernels

BLOCK_SIZE = 8
MIN_KEY_BYTES = 4
MAX_KEY_BYTES = 56


class PaddingMode(enum.Enum):
    ZERO = "zero"
    PKCS7 = "pkcs7"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class KeySchedule:
    """Expanded key state. Immutable; safe to share between threads."""

    key: bytes
    state: np.ndarray = field(repr=False)

    @property
    def p_array(self) -> np.ndarray:
        return self.state[:18]

    @property
    def s_boxes(self) -> np.ndarray:
        return self.state[18:].reshape(4, 256)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KeySchedule):
            return NotImplemented
        return np.array_equal(self.state, other.state)

    def __hash__(self) -> int:
        return hash(self.state.tobytes())


def check_key(key: bytes) -> bytes:
    key = bytes(key)
    if not MIN_KEY_BYTES <= len(key) <= MAX_KEY_BYTES:
        raise KeyLength(f"key must be {MIN_KEY_BYTES}..{MAX_KEY_BYTES} bytes, got {len(key)}")
    return key


def key_schedule(key: bytes) -> KeySchedule:
    key = check_key(key)
    state = _kernels.INIT_STATE.copy()
    _kernels.expand_key(state, np.frombuffer(key, dtype=np.uint8), len(key))
    state.flags.writeable = False
    return KeySchedule(key, state)


def _ecb(s: KeySchedule, data: bytes, decrypt: bool) -> bytes:
    src = np.frombuffer(data, dtype=np.uint8)
    dst = np.empty_like(src)
    _kernels.ecb_apply(s.state, src, dst, decrypt)
    return dst.tobytes()


def encrypt_block(s: KeySchedule, block: bytes) -> bytes:
    if len(block) != BLOCK_SIZE:
        raise BlockSize(f"block must be 8 bytes, got {len(block)}")
    return _ecb(s, bytes(block), False)


def decrypt_block(s: KeySchedule, block: bytes) -> bytes:
    if len(block) != BLOCK_SIZE:
        raise BlockSize(f"block must be 8 bytes, got {len(block)}")
    return _ecb(s, bytes(block), True)


def pad(data: bytes, mode: PaddingMode) -> bytes:
    rem = len(data) % BLOCK_SIZE
    if mode is PaddingMode.ZERO:
        return data + bytes(-len(data) % BLOCK_SIZE)
    if mode is PaddingMode.PKCS7:
        n = BLOCK_SIZE - rem
        return data + bytes([n]) * n
    if rem:
        raise Alignment(f"unpadded data must be a multiple of 8 bytes, got {len(data)}")
    return data


def strip_pkcs7(data: bytes) -> bytes:
    """Remove PKCS#7 padding; leave the data untouched when the padding is invalid."""
    if not data:
        return data
    n = data[-1]
    if n == 0 or n > BLOCK_SIZE or data[-n:] != bytes([n]) * n:
        return data
    return data[:-n]


def ecb_encrypt(s: KeySchedule, data: bytes, padding: PaddingMode = PaddingMode.ZERO) -> bytes:
    return _ecb(s, pad(bytes(data), padding), False)


def ecb_decrypt(s: KeySchedule, data: bytes, padding: PaddingMode = PaddingMode.ZERO) -> bytes:
    """ECB-decrypt ``data``. ZERO and NONE return every block; the caller trims."""
    if len(data) % BLOCK_SIZE:
        raise Alignment(f"ciphertext must be a multiple of 8 bytes, got {len(data)}")
    plain = _ecb(s, bytes(data), True)
    if padding is PaddingMode.PKCS7:
        return strip_pkcs7(plain)
    return plain
