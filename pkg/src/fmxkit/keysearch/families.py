"""Candidate-key generators, one per family.

Every generator is deterministic in its inputs and yields 16-byte keys in a
fixed order. With the fixture identity the five pattern families produce
14 + 140 + 8 + 300 + 83 = 545 keys.
"""

from __future__ import annotations

import calendar
import enum
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from ..errors import InvalidRange
from ..lcg import DeviceIdentity, gen_obfuscation

KEY_BYTES = 16
SUFFIX_CHARSET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
DIGEST_SALTS = ("", "Unitree", "unitree", "UNITREE", "Robotics", "G1", "FMX\x01")
MAC_PREFIXES = ("00:11:22", "AA:BB:CC", "DE:AD:BE")
MAC_VARIATIONS = 100
WEEK = 7 * 86400
DEFAULT_TS_START = calendar.timegm((2024, 1, 1, 0, 0, 0))
DEFAULT_TS_END = calendar.timegm((2025, 8, 1, 0, 0, 0))
MAX_SUFFIX_LEN = 6


class CandidateFamily(enum.Enum):
    DEVICE_CODE_VARIATIONS = "device_code_variations"
    DIGEST_COMBINATIONS = "digest_combinations"
    LCG_SEEDED = "lcg_seeded"
    HARDWARE_COMBOS = "hardware_combos"
    TIMESTAMP_KEYS = "timestamp_keys"
    SUFFIX_BRUTE_FORCE = "suffix_brute_force"


PATTERN_FAMILIES = (
    CandidateFamily.DEVICE_CODE_VARIATIONS,
    CandidateFamily.DIGEST_COMBINATIONS,
    CandidateFamily.LCG_SEEDED,
    CandidateFamily.HARDWARE_COMBOS,
    CandidateFamily.TIMESTAMP_KEYS,
)


def _fit(raw: bytes) -> bytes:
    return raw[:KEY_BYTES].ljust(KEY_BYTES, b"\x00")


def _md5(text: str) -> bytes:
    return hashlib.md5(text.encode()).digest()


def gen_device_code_variations(identity: DeviceIdentity) -> list[bytes]:
    dc = identity.device_code
    keys = [_fit(dc.encode())]
    if len(dc) >= 16:
        keys.append(_fit((dc[0:4] + dc[8:12] + dc[12:16] + dc[4:8]).encode()))
    keys.append(_fit(dc[::-1].encode()))
    if len(dc) >= 16:
        keys.append(_fit((dc[:8] + dc[-8:]).encode()))
    for shift in range(10):
        shifted = "".join(chr((ord(c) + shift) % 256) for c in dc)
        keys.append(_fit(shifted.encode()))
    return keys


def digest_inputs(identity: DeviceIdentity) -> list[str]:
    dc, rf, bt, mt = identity.device_code, identity.rf_code, identity.bluetooth, identity.machine_type
    return [
        dc,
        dc + rf,
        dc + bt,
        dc + mt,
        dc + rf + bt,
        rf + dc,
        bt + dc,
        f"{dc}:{rf}",
        f"{dc}-{bt}",
        f"{dc}_{mt}",
    ]


def gen_digest_combinations(identity: DeviceIdentity,
                            salts: Sequence[str] = DIGEST_SALTS) -> list[bytes]:
    keys = []
    for combo in digest_inputs(identity):
        for salt in salts:
            data = (combo + salt).encode()
            keys.append(hashlib.md5(data).digest())
            keys.append(hashlib.sha256(data).digest()[:KEY_BYTES])
    return keys


def default_lcg_seeds(identity: DeviceIdentity) -> list[int]:
    return [
        0, 1, 42, 123456, 0xDEADBEEF, 0xCAFEBABE,
        int(hashlib.md5(identity.device_code.encode()).hexdigest()[:8], 16),
        int(hashlib.md5(identity.rf_code.encode()).hexdigest()[:8], 16),
    ]


def gen_lcg_seeded(seeds: Sequence[int]) -> list[bytes]:
    return [gen_obfuscation(seed, KEY_BYTES) for seed in seeds]


def gen_hardware_combos(identity: DeviceIdentity, prefixes: Sequence[str] = MAC_PREFIXES,
                        variations: int = MAC_VARIATIONS) -> list[bytes]:
    keys = []
    for prefix in prefixes:
        for i in range(variations):
            mac = f"{prefix}:{i:02X}:{i:02X}:{i:02X}"
            keys.append(_md5(identity.device_code + mac.replace(":", "")))
    return keys


def timestamp_samples(start: int, end: int, stride: int) -> range:
    if stride <= 0 or start > end:
        raise InvalidRange(f"need start <= end and stride > 0 (got {start}, {end}, {stride})")
    count = max(1, math.ceil((end - start) / stride))
    return range(start, start + count * stride, stride)


def gen_timestamp_keys(identity: DeviceIdentity, start: int = DEFAULT_TS_START,
                       end: int = DEFAULT_TS_END, stride: int = WEEK) -> list[bytes]:
    return [_md5(identity.device_code + str(ts)) for ts in timestamp_samples(start, end, stride)]


def suffix_key_count(max_len: int, min_len: int = 1, charset: str = SUFFIX_CHARSET) -> int:
    return 2 * sum(len(charset) ** n for n in range(min_len, max_len + 1))


def gen_suffix_keys(identity: DeviceIdentity, max_len: int, min_len: int = 1,
                    charset: str = SUFFIX_CHARSET) -> Iterator[bytes]:
    """Lazily yield MD5(dc + s) then MD5(dc + rf + s) for each suffix s."""
    if not 1 <= min_len <= max_len <= MAX_SUFFIX_LEN:
        raise InvalidRange(f"suffix lengths must satisfy 1 <= {min_len} <= {max_len} <= 6")
    dc = identity.device_code.encode()
    dcrf = dc + identity.rf_code.encode()
    md5 = hashlib.md5
    for n in range(min_len, max_len + 1):
        for suffix in itertools.product(charset, repeat=n):
            tail = "".join(suffix).encode()
            yield md5(dc + tail).digest()
            yield md5(dcrf + tail).digest()


@dataclass(frozen=True)
class FamilyParams:
    """Knobs for the generators; defaults follow the reference attack tool."""

    lcg_seeds: tuple[int, ...] | None = None
    mac_prefixes: tuple[str, ...] = MAC_PREFIXES
    mac_variations: int = MAC_VARIATIONS
    ts_start: int = DEFAULT_TS_START
    ts_end: int = DEFAULT_TS_END
    ts_stride: int = WEEK
    suffix_min_len: int = 1
    suffix_max_len: int = 3
    salts: tuple[str, ...] = field(default=DIGEST_SALTS)


def generate(family: CandidateFamily, identity: DeviceIdentity,
             params: FamilyParams = FamilyParams()) -> Iterator[bytes]:
    if family is CandidateFamily.DEVICE_CODE_VARIATIONS:
        return iter(gen_device_code_variations(identity))
    if family is CandidateFamily.DIGEST_COMBINATIONS:
        return iter(gen_digest_combinations(identity, params.salts))
    if family is CandidateFamily.LCG_SEEDED:
        seeds = params.lcg_seeds if params.lcg_seeds is not None else default_lcg_seeds(identity)
        return iter(gen_lcg_seeded(seeds))
    if family is CandidateFamily.HARDWARE_COMBOS:
        return iter(gen_hardware_combos(identity, params.mac_prefixes, params.mac_variations))
    if family is CandidateFamily.TIMESTAMP_KEYS:
        return iter(gen_timestamp_keys(identity, params.ts_start, params.ts_end, params.ts_stride))
    return gen_suffix_keys(identity, params.suffix_max_len, params.suffix_min_len)


def generate_pattern_keys(identity: DeviceIdentity, params: FamilyParams = FamilyParams()) -> list[bytes]:
    return [k for fam in PATTERN_FAMILIES for k in generate(fam, identity, params)]
