"""Full wrap/load pipeline: inner LCG layer, Blowfish-ECB, FMX container.

wrap:  plaintext -> layer1 XOR -> Blowfish-ECB (padded) -> header || payload
load:  the inverse, with MD5 verification under the checksum header profile.

Reference tail encoding for MAIN_TEXT headers: bytes 12-15 carry the derived
seed (LE), bytes 16-19 the plaintext length (LE), the rest is zero. The length
is what lets zero-padded files round-trip plaintexts ending in NUL bytes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from . import container
from .cipher import KeySchedule, PaddingMode, ecb_decrypt, ecb_encrypt, key_schedule
from .cipher.blowfish import check_key
from .container import FmxHeader, HeaderProfile
from .errors import ChecksumMismatch, NotFmx
from .lcg import DeviceIdentity, ReferenceMd5, SeedProfile, TransformProfile, derive_seed, layer1_apply

FLAG_CHECKSUM = 0x01


@dataclass(frozen=True)
class PipelineConfig:
    key: bytes
    seed_profile: SeedProfile = field(default_factory=ReferenceMd5)
    transform: TransformProfile = TransformProfile.IDENTITY_ZERO
    header_profile: HeaderProfile = HeaderProfile.MAIN_TEXT
    padding: PaddingMode = PaddingMode.ZERO
    checksum_enabled: bool = False
    version: int = 1

    def __post_init__(self):
        object.__setattr__(self, "key", check_key(self.key))
        if self.checksum_enabled and self.header_profile is not HeaderProfile.APPENDIX_CHECKSUM:
            raise ValueError("checksum_enabled requires the APPENDIX_CHECKSUM header profile")

    @property
    def schedule(self) -> KeySchedule:
        return _schedule(self.key)


_SCHEDULES: dict[bytes, KeySchedule] = {}


def _schedule(key: bytes) -> KeySchedule:
    s = _SCHEDULES.get(key)
    if s is None:
        if len(_SCHEDULES) > 256:
            _SCHEDULES.clear()
        s = _SCHEDULES[key] = key_schedule(key)
    return s


def _build_header(plaintext: bytes, payload: bytes, seed: int, cfg: PipelineConfig) -> FmxHeader:
    if cfg.header_profile is HeaderProfile.APPENDIX_CHECKSUM:
        if cfg.checksum_enabled:
            return FmxHeader.appendix(cfg.version, FLAG_CHECKSUM, len(plaintext),
                                      hashlib.md5(plaintext).digest())
        return FmxHeader.appendix(cfg.version, 0, len(plaintext))
    tail = struct.pack("<II", seed, len(plaintext))
    return FmxHeader.main_text(cfg.version, len(payload), tail)


def wrap(plaintext: bytes, identity: DeviceIdentity, cfg: PipelineConfig) -> bytes:
    plaintext = bytes(plaintext)
    seed = derive_seed(identity, cfg.seed_profile)
    inner = layer1_apply(plaintext, seed, cfg.transform)
    payload = ecb_encrypt(cfg.schedule, inner, cfg.padding)
    return container.wrap_payload(_build_header(plaintext, payload, seed, cfg), payload)


def _plaintext_length(header: FmxHeader) -> int:
    if header.profile is HeaderProfile.APPENDIX_CHECKSUM:
        return header.original_size
    return struct.unpack_from("<I", header.tail, 4)[0]


def load(data: bytes, identity: DeviceIdentity, cfg: PipelineConfig) -> bytes:
    if not container.detect(data):
        raise NotFmx("missing FMX magic")
    box = container.unwrap(data, cfg.header_profile)
    inner = ecb_decrypt(cfg.schedule, box.payload, cfg.padding)
    if cfg.padding is not PaddingMode.PKCS7:
        inner = inner[:_plaintext_length(box.header)]
    plain = layer1_apply(inner, derive_seed(identity, cfg.seed_profile), cfg.transform)
    header = box.header
    if header.profile is HeaderProfile.APPENDIX_CHECKSUM and header.flags & FLAG_CHECKSUM:
        if hashlib.md5(plain).digest() != header.checksum:
            raise ChecksumMismatch("MD5 of decrypted plaintext does not match header")
    return plain


def layer2_only_decrypt(data: bytes, key: bytes) -> bytes:
    """Strip the 32-byte header, zero-fill the last block to 8, ECB-decrypt.

    Output keeps every block, matching a ``tail -c +33 | dd bs=8 conv=sync |
    openssl enc -bf-ecb -nopad -d`` pipeline byte for byte.
    """
    if not container.detect(data):
        raise NotFmx("missing FMX magic")
    payload = bytes(data[container.HEADER_SIZE:])
    payload += bytes(-len(payload) % 8)
    return ecb_decrypt(_schedule(check_key(key)), payload, PaddingMode.NONE)


def wrap_layer2_only(plaintext: bytes, key: bytes, padding: PaddingMode = PaddingMode.ZERO,
                     version: int = 1) -> bytes:
    """FMX file whose payload is Blowfish-ECB over ``plaintext`` with no inner layer.

    This is the shape a Layer-2 key search expects; it is used for planted
    attack fixtures.
    """
    payload = ecb_encrypt(_schedule(check_key(key)), bytes(plaintext), padding)
    tail = struct.pack("<II", 0, len(plaintext))
    return container.wrap_payload(FmxHeader.main_text(version, len(payload), tail), payload)
