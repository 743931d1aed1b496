import json
from pathlib import Path

import pytest
from cryptography.hazmat.decrepit.ciphers.algorithms import Blowfish as RefBlowfish
from cryptography.hazmat.primitives.ciphers import Cipher, modes

from fmxkit.lcg import FIXTURE_IDENTITY

DATA = Path(__file__).parent / "data"

# Plaintext used for planted-key fixtures; looks like a real config.
CONFIG_DOC = json.dumps({
    "service_name": "master_service",
    "version": "1.0.0",
    "runtime": {"monitor_interval": 5000, "restart_delay": 1000},
    "services": [{"name": "iox-roudi", "type": "prio", "enabled": True}],
}).encode()


def ref_ecb(key: bytes, data: bytes, decrypt: bool = False) -> bytes:
    """Blowfish-ECB from the cryptography package, used as an independent oracle."""
    c = Cipher(RefBlowfish(key), modes.ECB())
    op = c.decryptor() if decrypt else c.encryptor()
    return op.update(data) + op.finalize()


def ref_dec2(data: bytes, key: bytes) -> bytes:
    """Strip 32 bytes, zero-fill to a block boundary, decrypt."""
    body = data[32:]
    body += bytes(-len(body) % 8)
    return ref_ecb(key, body, decrypt=True)


@pytest.fixture
def identity():
    return FIXTURE_IDENTITY


@pytest.fixture(scope="session")
def vectors():
    return json.loads((DATA / "blowfish_vectors.json").read_text())
