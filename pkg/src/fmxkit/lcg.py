"""Inner cipher layer: LCG keystream XOR, plus seed derivation.

The recurrence is X' = (0x19660D * X + 0x3C6EF35F) mod 2**32. Two byte
extractions are used by the scheme:

* keystream: K_i = X_i >> 24 with X_0 = seed (byte taken before advancing);
* gen_obfuscation: bits 16..23 of the state *after* each advance.

The real seed function and the extra per-index transform were never recovered,
so both are pluggable profiles here. ``ReferenceMd5`` is a stand-in and has no
claim to match real devices.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass
from typing import Union

import numpy as np

LCG_A = 0x19660D  # 1664525
LCG_C = 0x3C6EF35F  # 1013904223
MASK32 = 0xFFFFFFFF


@dataclass(frozen=True)
class DeviceIdentity:
    device_code: str
    rf_code: str = ""
    bluetooth: str = ""
    machine_type: str = ""
    firmware_version: int = 1

    def __post_init__(self):
        if not self.device_code:
            raise ValueError("device_code must be non-empty")


FIXTURE_IDENTITY = DeviceIdentity("E21D1000P64BKH86", "34d21p", "04360", "4", 1)


@dataclass(frozen=True)
class ReferenceMd5:
    """Seed = first 4 bytes (LE) of MD5(device_code|rf_code|machine_type|version)."""


@dataclass(frozen=True)
class ExplicitSeed:
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MASK32:
            raise ValueError(f"seed must fit in 32 bits, got {self.value}")


SeedProfile = Union[ReferenceMd5, ExplicitSeed]


class TransformProfile(enum.Enum):
    IDENTITY_ZERO = "zero"  # f(i) = 0
    INDEX_BYTE = "index"  # f(i) = i mod 256


def lcg_step(x: int) -> int:
    return (LCG_A * x + LCG_C) & MASK32


def lcg_next(x: int) -> tuple[int, int]:
    """Return (next state, keystream byte of the current state)."""
    return lcg_step(x), (x >> 24) & 0xFF


def _states(seed: int, n: int) -> np.ndarray:
    # Closed form X_n = A^n * X_0 + C * (1 + A + ... + A^(n-1)), all mod 2**32;
    # uint32 cumprod/cumsum wrap exactly at 2**32.
    if n == 0:
        return np.zeros(0, dtype=np.uint32)
    mult = np.full(n, LCG_A, dtype=np.uint32)
    mult[0] = 1
    powers = np.cumprod(mult, dtype=np.uint32)
    geom = np.cumsum(powers, dtype=np.uint32) - powers  # sum of A^k for k < n
    return powers * np.uint32(seed & MASK32) + geom * np.uint32(LCG_C)


def keystream(seed: int, length: int) -> bytes:
    return (_states(seed, length) >> 24).astype(np.uint8).tobytes()


def gen_obfuscation(seed: int, length: int) -> bytes:
    post = _states(seed, length + 1)[1:]
    return ((post >> 16) & 0xFF).astype(np.uint8).tobytes()


def transform_bytes(profile: TransformProfile, length: int) -> np.ndarray:
    if profile is TransformProfile.INDEX_BYTE:
        return (np.arange(length) & 0xFF).astype(np.uint8)
    return np.zeros(length, dtype=np.uint8)


def derive_seed(identity: DeviceIdentity, profile: SeedProfile) -> int:
    if isinstance(profile, ExplicitSeed):
        return profile.value
    material = (identity.device_code + identity.rf_code + identity.machine_type
                + str(identity.firmware_version)).encode()
    return struct.unpack("<I", hashlib.md5(material).digest()[:4])[0]


def layer1_apply(data: bytes, seed: int,
                 transform: TransformProfile = TransformProfile.IDENTITY_ZERO) -> bytes:
    """XOR with keystream and f(i). Self-inverse."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    ks = np.frombuffer(keystream(seed, len(buf)), dtype=np.uint8)
    return (buf ^ ks ^ transform_bytes(transform, len(buf))).tobytes()
