"""Known-plaintext classification of a candidate key against an FMX file."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .. import container
from ..cipher import KeySchedule, key_schedule
from ..cipher.blowfish import _ecb, strip_pkcs7

PAYLOAD_OFFSET = container.HEADER_SIZE


class Verdict(enum.Enum):
    REJECT = "reject"
    WEAK_ACCEPT = "weak_accept"  # first byte looked like JSON, full text did not
    CONFIRM = "confirm"


@dataclass(frozen=True)
class PlaintextDetector:
    """Two-stage filter: first decrypted byte, then a look at the full text.

    ``min_printable`` is the share of printable characters required in the
    confirm window. With 0 the filter degenerates to "'{' appears in the
    window", which any key whose first byte decrypts to '{' passes (about one
    wrong key in 256).
    """

    first_byte_accept: frozenset[int] = frozenset(b"{[")
    confirm_window: int = 100
    min_printable: float = 0.95

    def confirm(self, schedule: KeySchedule, data: bytes) -> bool:
        """Decrypt the whole payload and look for '{' near the start."""
        payload = data[PAYLOAD_OFFSET:]
        whole = len(payload) - len(payload) % 8
        decrypted = _ecb(schedule, bytes(payload[:whole]), True) + bytes(payload[whole:])
        # Padding at the end of a short document must not count as noise.
        decrypted = strip_pkcs7(decrypted).rstrip(b"\x00")
        window = decrypted.decode("utf-8", errors="ignore")[:self.confirm_window]
        if "{" not in window:
            return False
        if self.min_printable <= 0:
            return True
        printable = sum(c.isprintable() or c in "\t\r\n" for c in window)
        return printable >= self.min_printable * len(window)


def try_key(data: bytes, key: bytes, detector: PlaintextDetector = PlaintextDetector()) -> Verdict:
    if len(data) < PAYLOAD_OFFSET + 8:
        return Verdict.REJECT
    s = key_schedule(key)
    first = _ecb(s, bytes(data[PAYLOAD_OFFSET:PAYLOAD_OFFSET + 8]), True)
    if first[0] not in detector.first_byte_accept:
        return Verdict.REJECT
    return Verdict.CONFIRM if detector.confirm(s, data) else Verdict.WEAK_ACCEPT


# The reference tool's filter, without the printable-share check.
LENIENT = PlaintextDetector(min_printable=0.0)
