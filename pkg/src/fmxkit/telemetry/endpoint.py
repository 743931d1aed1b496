"""MQTT endpoint configuration and the report emission schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Optional
from urllib.parse import urlsplit

from ..errors import SchemaError

DEFAULT_REPORT_INTERVAL = 300
DEFAULT_RECONNECT_INTERVAL = 10


@dataclass(frozen=True)
class ServerUri:
    scheme: str
    host: str
    port: int

    @classmethod
    def parse(cls, uri: str) -> "ServerUri":
        parts = urlsplit(uri)
        try:
            port = parts.port
        except ValueError as exc:
            raise SchemaError(f"bad port in {uri!r}") from exc
        if not parts.scheme or not parts.hostname or port is None:
            raise SchemaError(f"URI {uri!r} needs scheme, host and port")
        return cls(parts.scheme, parts.hostname, port)

    @property
    def destination(self) -> str:
        return f"{self.host}:{self.port}"


@dataclass(frozen=True)
class EndpointConfig:
    server_uri_map: Mapping[str, str]
    auto_reconnect: bool = True
    auth_type: int = 1
    reconnect_interval: float = DEFAULT_RECONNECT_INTERVAL
    report_interval: float = DEFAULT_REPORT_INTERVAL
    servers: Mapping[str, ServerUri] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.report_interval <= 0:
            raise SchemaError("report_interval must be positive")
        if self.reconnect_interval <= 0:
            raise SchemaError("reconnect_interval must be positive")
        servers = {region: ServerUri.parse(uri) for region, uri in self.server_uri_map.items()}
        object.__setattr__(self, "servers", servers)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "EndpointConfig":
        try:
            return cls(
                server_uri_map=dict(doc["ServerUriMap"]),
                auto_reconnect=bool(doc.get("AutoReconnect", True)),
                auth_type=int(doc.get("AuthType", 1)),
                reconnect_interval=doc.get("ReconnectInterval", DEFAULT_RECONNECT_INTERVAL),
                report_interval=doc.get("ReportInterval", DEFAULT_REPORT_INTERVAL),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"bad endpoint config: {exc}") from exc

    def server_for(self, region: str) -> ServerUri:
        if region in self.servers:
            return self.servers[region]
        if "default" in self.servers:
            return self.servers["default"]
        raise SchemaError(f"no server for region {region!r} and no default")


@dataclass(frozen=True)
class Emission:
    kind: str  # report, missed, disconnect, reconnect_attempt, reconnected
    t: float
    index: Optional[int] = None  # report slot k, for report/missed


class ReportScheduler:
    """Reports fire at t0 + k*interval, computed by multiplication so they never drift.

    Outages are (start, end) windows during which the link is down. A report
    slot that falls while disconnected is emitted as `missed`. With
    auto-reconnect, attempts happen every reconnect_interval after the
    disconnect until one lands at or after the outage end.
    """

    def __init__(self, cfg: EndpointConfig, t0: float = 0):
        self.cfg = cfg
        self.t0 = t0

    def slot(self, k: int) -> float:
        return self.t0 + k * self.cfg.report_interval

    def report_times(self, until: float) -> Iterator[float]:
        k = 0
        while (t := self.slot(k)) < until:
            yield t
            k += 1

    def run(self, until: float, outages: Iterable[tuple[float, float]] = ()) -> Iterator[Emission]:
        pending = sorted(outages)
        k = 0
        connected = True
        down_since = 0.0
        down_until = 0.0
        attempt = 0
        while True:
            t_report = self.slot(k)
            t_outage = pending[0][0] if connected and pending else None
            t_attempt = None
            if not connected and self.cfg.auto_reconnect:
                t_attempt = down_since + (attempt + 1) * self.cfg.reconnect_interval
            nxt = min(t for t in (t_report, t_outage, t_attempt) if t is not None)
            if nxt >= until:
                return
            if t_attempt is not None and nxt == t_attempt:
                attempt += 1
                ok = t_attempt >= down_until
                yield Emission("reconnect_attempt", t_attempt)
                if ok:
                    connected = True
                    yield Emission("reconnected", t_attempt)
            elif t_outage is not None and nxt == t_outage:
                start, end = pending.pop(0)
                connected = False
                down_since, down_until, attempt = start, end, 0
                yield Emission("disconnect", start)
            else:
                yield Emission("report" if connected else "missed", t_report, k)
                k += 1
