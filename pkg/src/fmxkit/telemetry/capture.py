"""Capture records, per-endpoint rate accounting, allowlists and egress rules."""

from __future__ import annotations

import base64
import ipaddress
import json
import statistics
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import IO, Any, Iterable, Optional, Sequence, Union

from ..errors import EmptyCapture, SchemaError

IPNetwork = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]


def split_destination(dest: str) -> tuple[str, int]:
    host, sep, port = dest.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise SchemaError(f"destination {dest!r} is not host:port")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    return host, int(port)


@dataclass(frozen=True)
class CaptureRecord:
    timestamp: float
    destination: str
    byte_count: int
    payload: Optional[bytes] = None

    def __post_init__(self) -> None:
        split_destination(self.destination)
        if self.byte_count < 0:
            raise SchemaError("byte_count must be non-negative")
        if self.payload is not None and self.byte_count < len(self.payload):
            raise SchemaError("byte_count smaller than payload")

    @property
    def host(self) -> str:
        return split_destination(self.destination)[0]

    @property
    def port(self) -> int:
        return split_destination(self.destination)[1]

    def to_json(self) -> str:
        doc: dict[str, Any] = {"ts": self.timestamp, "dst": self.destination, "bytes": self.byte_count}
        if self.payload is not None:
            doc["payload_b64"] = base64.b64encode(self.payload).decode("ascii")
        return json.dumps(doc)

    @classmethod
    def from_json(cls, line: str) -> "CaptureRecord":
        try:
            doc = json.loads(line)
            payload = doc.get("payload_b64")
            return cls(float(doc["ts"]), str(doc["dst"]), int(doc["bytes"]),
                       None if payload is None else base64.b64decode(payload, validate=True))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"bad capture line {line.strip()!r}: {exc}") from exc


def read_capture(stream: IO[str]) -> list[CaptureRecord]:
    return [CaptureRecord.from_json(line) for line in stream if line.strip()]


def write_capture(records: Iterable[CaptureRecord], stream: IO[str]) -> None:
    for r in records:
        stream.write(r.to_json() + "\n")


def synthetic_capture(totals: dict[str, int], duration: float = 600.0,
                      packets: int = 121) -> list[CaptureRecord]:
    """Evenly spaced records from 0 to `duration` that sum to each destination's total."""
    if packets < 2:
        raise ValueError("need at least two packets to span a duration")
    records = []
    for dest, total in totals.items():
        base, extra = divmod(total, packets)
        for i in range(packets):
            ts = duration * i / (packets - 1)
            records.append(CaptureRecord(ts, dest, base + (1 if i < extra else 0)))
    records.sort(key=lambda r: r.timestamp)
    return records


class Allowlist:
    """Set of permitted hosts: exact names/addresses or CIDR networks."""

    def __init__(self, entries: Iterable[str] = ()):
        self.networks: list[IPNetwork] = []
        self.hosts: set[str] = set()
        for e in entries:
            self.add(e)

    def add(self, entry: str) -> None:
        entry = entry.strip()
        try:
            self.networks.append(ipaddress.ip_network(entry, strict=False))
        except ValueError:
            self.hosts.add(entry.lower())

    def permits(self, host: str) -> bool:
        if host.lower() in self.hosts:
            return True
        try:
            addr = ipaddress.ip_address(host)
        except ValueError:
            return False
        return any(addr.version == n.version and addr in n for n in self.networks)


@dataclass
class EndpointStats:
    destination: str
    total_bytes: int
    records: int
    first_ts: float
    last_ts: float
    mean_rate_bps: Optional[float]
    inter_arrival_mean: Optional[float]
    inter_arrival_min: Optional[float]
    inter_arrival_max: Optional[float]
    inter_arrival_stdev: Optional[float]
    flagged: bool


@dataclass
class RateReport:
    duration: float
    total_bytes: int
    mean_rate_bps: Optional[float]
    endpoints: list[EndpointStats] = field(default_factory=list)

    @property
    def flagged(self) -> list[str]:
        return [e.destination for e in self.endpoints if e.flagged]

    def endpoint(self, destination: str) -> EndpointStats:
        for e in self.endpoints:
            if e.destination == destination:
                return e
        raise KeyError(destination)

    def to_dict(self, policy: Sequence[str] = ()) -> dict[str, Any]:
        return {
            "duration": self.duration,
            "total_bytes": self.total_bytes,
            "mean_rate_bps": self.mean_rate_bps,
            "endpoints": [asdict(e) for e in self.endpoints],
            "flagged": self.flagged,
            "suggested_rules": emit_block_rules(self, policy),
        }


def _rate(total_bytes: int, duration: float) -> Optional[float]:
    return total_bytes * 8 / duration if duration > 0 else None


def analyze_capture(records: Iterable[CaptureRecord], allowlist: Union[Allowlist, Iterable[str]] = (),
                    duration: Optional[float] = None) -> RateReport:
    """Per-destination totals and mean bit rates.

    Rates divide by the capture span (first to last timestamp over the whole
    capture) unless an explicit `duration` is given, so every endpoint shares
    one denominator. Endpoints keep first-seen order.
    """
    recs = sorted(records, key=lambda r: r.timestamp)
    if not recs:
        raise EmptyCapture("capture has no records")
    if not isinstance(allowlist, Allowlist):
        allowlist = Allowlist(allowlist)
    span = recs[-1].timestamp - recs[0].timestamp if duration is None else duration
    groups: "OrderedDict[str, list[CaptureRecord]]" = OrderedDict()
    for r in recs:
        groups.setdefault(r.destination, []).append(r)
    endpoints = []
    for dest, rs in groups.items():
        gaps = [b.timestamp - a.timestamp for a, b in zip(rs, rs[1:])]
        total = sum(r.byte_count for r in rs)
        endpoints.append(EndpointStats(
            destination=dest,
            total_bytes=total,
            records=len(rs),
            first_ts=rs[0].timestamp,
            last_ts=rs[-1].timestamp,
            mean_rate_bps=_rate(total, span),
            inter_arrival_mean=statistics.fmean(gaps) if gaps else None,
            inter_arrival_min=min(gaps) if gaps else None,
            inter_arrival_max=max(gaps) if gaps else None,
            inter_arrival_stdev=statistics.pstdev(gaps) if gaps else None,
            flagged=not allowlist.permits(rs[0].host),
        ))
    total = sum(e.total_bytes for e in endpoints)
    return RateReport(span, total, _rate(total, span), endpoints)


def emit_block_rules(report: Optional[RateReport], policy: Sequence[str] = ()) -> list[str]:
    """ufw-style deny rules: policy networks first, then one rule per flagged endpoint."""
    lines: list[str] = []
    for cidr in policy:
        lines.append(f"ufw deny out to {cidr}")
    if report is not None:
        for dest in report.flagged:
            host, port = split_destination(dest)
            lines.append(f"ufw deny out to {host} port {port} proto tcp")
    return list(dict.fromkeys(lines))
