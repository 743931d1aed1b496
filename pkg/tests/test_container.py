import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmxkit.container import (HEADER_SIZE, MAGIC, FmxContainer, FmxHeader,
                              HeaderProfile, detect, parse_header,
                              serialize_header, unwrap, wrap_payload)
from fmxkit.errors import InvalidHeader, NotFmx, Truncated

u32 = st.integers(0, 2**32 - 1)


def test_main_text_layout():
    h = FmxHeader.main_text(1, 40, b"\xaa\xbb")
    raw = serialize_header(h)
    assert len(raw) == HEADER_SIZE
    assert raw[:4] == b"FMX\x01"
    assert struct.unpack_from("<II", raw, 4) == (1, 52)
    assert raw[12:14] == b"\xaa\xbb" and raw[14:] == bytes(18)
    assert h.payload_consistent(40)
    assert not h.payload_consistent(41)


def test_appendix_layout():
    digest = bytes(range(16))
    h = FmxHeader.appendix(2, 1, 1234, digest)
    raw = serialize_header(h)
    assert struct.unpack_from("<III", raw, 4) == (2, 1, 1234)
    assert raw[16:32] == digest
    back = parse_header(raw, HeaderProfile.APPENDIX_CHECKSUM)
    assert (back.flags, back.original_size, back.checksum) == (1, 1234, digest)


def test_detect():
    assert detect(MAGIC + bytes(28))
    assert not detect(b"FMX\x02" + bytes(28))
    assert not detect(b"")


@pytest.mark.parametrize("data, exc", [
    (b"", Truncated),
    (b"FM", Truncated),
    (MAGIC + bytes(27), Truncated),
    (b"PK\x03\x04" + bytes(28), NotFmx),
    (b"{}", NotFmx),
])
def test_parse_errors(data, exc):
    with pytest.raises(exc):
        parse_header(data)


def test_invalid_fields():
    with pytest.raises(InvalidHeader):
        FmxHeader.main_text(1, 0, bytes(21))
    with pytest.raises(InvalidHeader):
        serialize_header(FmxHeader(2**32, 0))
    with pytest.raises(InvalidHeader):
        serialize_header(FmxHeader(1, 0, bytes(19)))
    with pytest.raises(InvalidHeader):
        FmxHeader.appendix(1, 0, 0, bytes(15))


def test_unwrap_splits_payload():
    payload = bytes(range(24))
    data = wrap_payload(FmxHeader.main_text(1, len(payload)), payload)
    box = unwrap(data)
    assert box.payload == payload
    assert box.to_bytes() == data
    assert isinstance(box, FmxContainer)


@given(u32, u32, st.binary(min_size=20, max_size=20), st.sampled_from(list(HeaderProfile)))
def test_header_round_trip(version, size, tail, profile):
    h = FmxHeader(version, size, tail, profile)
    assert parse_header(serialize_header(h), profile) == h


@given(st.binary(min_size=28, max_size=28), st.binary(max_size=64))
def test_bytes_round_trip(rest, payload):
    data = MAGIC + rest + payload
    assert serialize_header(parse_header(data)) == data[:HEADER_SIZE]
    assert unwrap(data).to_bytes() == data
