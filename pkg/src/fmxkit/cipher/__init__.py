from .blowfish import (
    BLOCK_SIZE,
    KeySchedule,
    PaddingMode,
    decrypt_block,
    ecb_decrypt,
    ecb_encrypt,
    encrypt_block,
    key_schedule,
    pad,
    strip_pkcs7,
)

__all__ = [
    "BLOCK_SIZE",
    "KeySchedule",
    "PaddingMode",
    "decrypt_block",
    "ecb_decrypt",
    "ecb_encrypt",
    "encrypt_block",
    "key_schedule",
    "pad",
    "strip_pkcs7",
]
