"""Compiled Blowfish primitives.

Key state is one flat uint32 array of 1042 words: P-array at [0, 18), then the
four S-boxes back to back at [18, 1042). Arithmetic runs on int64 values, so
every sum is masked back to 32 bits explicitly.
"""

import numba as nb
import numpy as np

from ._tables import P_INIT, S0_INIT, S1_INIT, S2_INIT, S3_INIT

STATE_WORDS = 18 + 1024
INIT_STATE = np.array(P_INIT + S0_INIT + S1_INIT + S2_INIT + S3_INIT, dtype=np.uint32)
INIT_STATE.flags.writeable = False

_M = 0xFFFFFFFF
_JIT = dict(cache=True, nogil=True)


@nb.njit(**_JIT)
def _f(s, x):
    return ((((s[18 + (x >> 24)] + s[274 + ((x >> 16) & 255)]) & _M)
             ^ s[530 + ((x >> 8) & 255)]) + s[786 + (x & 255)]) & _M


@nb.njit(**_JIT)
def encrypt_words(s, l, r):
    for i in range(0, 16, 2):
        l ^= s[i]
        r ^= _f(s, l)
        r ^= s[i + 1]
        l ^= _f(s, r)
    return r ^ s[17], l ^ s[16]


@nb.njit(**_JIT)
def decrypt_words(s, l, r):
    for i in range(17, 1, -2):
        l ^= s[i]
        r ^= _f(s, l)
        r ^= s[i - 1]
        l ^= _f(s, r)
    return r ^ s[0], l ^ s[1]


@nb.njit(**_JIT)
def _mix_key(s, key, klen):
    j = 0
    for i in range(18):
        d = 0
        for _ in range(4):
            d = ((d << 8) | key[j]) & _M
            j += 1
            if j >= klen:
                j = 0
        s[i] ^= d


@nb.njit(**_JIT)
def expand_key(s, key, klen):
    """Standard key expansion into ``s`` (which must hold the pi tables)."""
    _mix_key(s, key, klen)
    l = 0
    r = 0
    for q in range(0, STATE_WORDS, 2):
        l, r = encrypt_words(s, l, r)
        s[q] = l
        s[q + 1] = r


@nb.njit(**_JIT)
def _expand4(s0, s1, s2, s3):
    # Four independent expansions interleaved round by round; the Feistel chain
    # is latency-bound, so this keeps the load ports busy.
    l0 = r0 = l1 = r1 = l2 = r2 = l3 = r3 = 0
    for q in range(0, STATE_WORDS, 2):
        for i in range(0, 16, 2):
            l0 ^= s0[i]
            l1 ^= s1[i]
            l2 ^= s2[i]
            l3 ^= s3[i]
            r0 ^= _f(s0, l0)
            r1 ^= _f(s1, l1)
            r2 ^= _f(s2, l2)
            r3 ^= _f(s3, l3)
            r0 ^= s0[i + 1]
            r1 ^= s1[i + 1]
            r2 ^= s2[i + 1]
            r3 ^= s3[i + 1]
            l0 ^= _f(s0, r0)
            l1 ^= _f(s1, r1)
            l2 ^= _f(s2, r2)
            l3 ^= _f(s3, r3)
        l0, r0 = r0 ^ s0[17], l0 ^ s0[16]
        l1, r1 = r1 ^ s1[17], l1 ^ s1[16]
        l2, r2 = r2 ^ s2[17], l2 ^ s2[16]
        l3, r3 = r3 ^ s3[17], l3 ^ s3[16]
        s0[q] = l0
        s0[q + 1] = r0
        s1[q] = l1
        s1[q + 1] = r1
        s2[q] = l2
        s2[q + 1] = r2
        s3[q] = l3
        s3[q + 1] = r3


@nb.njit(**_JIT)
def decrypt_first_block_batch(keys, lengths, init, l_in, r_in, out):
    """Decrypt one block under every key row; ``out[k]`` gets (l << 32) | r."""
    n = keys.shape[0]
    st = np.empty((4, STATE_WORDS), np.uint32)
    for base in range(0, n, 4):
        for z in range(4):
            k = min(base + z, n - 1)
            st[z, :] = init
            _mix_key(st[z], keys[k], lengths[k])
        _expand4(st[0], st[1], st[2], st[3])
        for z in range(min(4, n - base)):
            l, r = decrypt_words(st[z], l_in, r_in)
            out[base + z] = (np.uint64(l) << np.uint64(32)) | np.uint64(r)


@nb.njit(**_JIT)
def ecb_apply(s, src, dst, decrypt):
    for off in range(0, src.shape[0], 8):
        l = ((src[off] << 24) | (src[off + 1] << 16) | (src[off + 2] << 8) | src[off + 3]) & _M
        r = ((src[off + 4] << 24) | (src[off + 5] << 16) | (src[off + 6] << 8) | src[off + 7]) & _M
        if decrypt:
            l, r = decrypt_words(s, l, r)
        else:
            l, r = encrypt_words(s, l, r)
        dst[off] = (l >> 24) & 255
        dst[off + 1] = (l >> 16) & 255
        dst[off + 2] = (l >> 8) & 255
        dst[off + 3] = l & 255
        dst[off + 4] = (r >> 24) & 255
        dst[off + 5] = (r >> 16) & 255
        dst[off + 6] = (r >> 8) & 255
        dst[off + 7] = r & 255
