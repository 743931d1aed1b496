"""Exception hierarchy shared by all workbench modules."""


class FmxKitError(Exception):
    """Base class for every error raised by this package."""


# container
class NotFmx(FmxKitError, ValueError):
    """Input does not start with the FMX magic."""


class Truncated(FmxKitError, ValueError):
    """Input is shorter than the 32-byte header."""


class InvalidHeader(FmxKitError, ValueError):
    """A header field violates its invariants."""


# cipher
class KeyLength(FmxKitError, ValueError):
    """Blowfish key outside 4..56 bytes."""


class BlockSize(FmxKitError, ValueError):
    """Block is not exactly 8 bytes."""


class Alignment(FmxKitError, ValueError):
    """Data length is not a multiple of 8 where that is required."""


# pipeline
class ChecksumMismatch(FmxKitError):
    """Decrypted plaintext does not match the header MD5."""


# keysearch
class InvalidRange(FmxKitError, ValueError):
    """Bad timestamp window or stride."""


# orchestrator
class ParseError(FmxKitError, ValueError):
    """Master configuration could not be parsed or is inconsistent."""


class UnknownName(FmxKitError, KeyError):
    """Startup sequence references a name with no spec."""


class RpcError(FmxKitError):
    """Base for errors reported over the RPC surface."""


class UnknownHandler(RpcError):
    pass


class UnknownService(RpcError):
    pass


class UnknownCommand(RpcError):
    pass


class ForbiddenService(RpcError):
    pass


class IllegalTransition(FmxKitError):
    """A service lifecycle transition outside the state graph."""


# telemetry
class SchemaError(FmxKitError, ValueError):
    """Telemetry document does not follow the reportState schema."""


class EmptyCapture(FmxKitError, ValueError):
    """No records to analyze."""
