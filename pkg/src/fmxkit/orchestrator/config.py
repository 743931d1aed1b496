"""Master-service configuration model and loader."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Mapping, Optional

from ..container import MAGIC
from ..errors import ParseError, UnknownName
from ..lcg import DeviceIdentity

log = logging.getLogger(__name__)

DEFAULT_RESTART_MAX_ATTEMPTS = 3
DEFAULT_MONITOR_INTERVAL_MS = 5000
DEFAULT_GLOBAL_PROTECTION_CAP = 30


class Mode(Enum):
    PRIO = "prio"
    INIT = "init"
    ONCE = "once"
    FORBID = "forbid"
    MANUAL = "manual"
    NORMAL = "normal"


class BatchKind(Enum):
    COMMAND = "command"
    SERVICE = "service"


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    path: str = ""
    mode: Mode = Mode.NORMAL
    enabled: bool = True
    restart_on_failure: bool = True
    restart_max_attempts: int = DEFAULT_RESTART_MAX_ATTEMPTS
    priority: int = 0
    config_path: Optional[str] = None
    description: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ParseError("service name must be non-empty")
        if self.restart_max_attempts < 0:
            raise ParseError(f"{self.name}: restart_max_attempts must be >= 0")

    @property
    def autostart(self) -> bool:
        return self.enabled and self.mode not in (Mode.FORBID, Mode.MANUAL)


@dataclass(frozen=True)
class CommandSpec:
    name: str
    command: str = ""
    mode: Mode = Mode.NORMAL
    priority: int = 0
    timeout_ms: Optional[int] = None


@dataclass(frozen=True)
class Protection:
    guardian: str
    protected: tuple[str, ...]
    min_uptime: float  # seconds


@dataclass(frozen=True)
class Batch:
    kind: BatchKind
    names: tuple[str, ...]


@dataclass
class MasterConfig:
    services: list[ServiceSpec]
    commands: list[CommandSpec] = field(default_factory=list)
    groups: dict[str, list[str]] = field(default_factory=dict)
    protections: list[Protection] = field(default_factory=list)
    startup_sequence: list[Batch] = field(default_factory=list)
    monitor_interval_ms: int = DEFAULT_MONITOR_INTERVAL_MS
    global_protection_restart_cap: int = DEFAULT_GLOBAL_PROTECTION_CAP
    rpc_handlers: list[str] = field(default_factory=list)
    socket_path: Optional[str] = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        seen: set[str] = set()
        for s in self.services:
            if s.name in seen:
                raise ParseError(f"duplicate service name {s.name!r}")
            seen.add(s.name)
        cmd_names: set[str] = set()
        for c in self.commands:
            if c.name in cmd_names:
                raise ParseError(f"duplicate command name {c.name!r}")
            cmd_names.add(c.name)
        by_name = self.service_map()
        for group, names in self.groups.items():
            try:
                mode = Mode(group)
            except ValueError:
                raise ParseError(f"unknown service group {group!r}") from None
            for n in names:
                spec = by_name.get(n)
                if spec is None:
                    if n not in cmd_names:
                        raise ParseError(f"group {group!r} names unknown entry {n!r}")
                    continue
                # Membership in the forbid group overrides the declared type.
                if mode is not Mode.FORBID and spec.mode is not mode:
                    raise ParseError(
                        f"group {group!r} lists {n!r} whose type is {spec.mode.value!r}")
        for p in self.protections:
            for n in (p.guardian, *p.protected):
                if n not in by_name:
                    raise ParseError(f"protection references unknown service {n!r}")
        if self.monitor_interval_ms <= 0:
            raise ParseError("monitor_interval must be positive")
        if self.global_protection_restart_cap < 0:
            raise ParseError("global protection restart cap must be >= 0")

    def service_map(self) -> dict[str, ServiceSpec]:
        return {s.name: s for s in self.services}

    def command_map(self) -> dict[str, CommandSpec]:
        return {c.name: c for c in self.commands}

    def is_forbidden(self, name: str) -> bool:
        spec = self.service_map().get(name)
        if spec is not None and spec.mode is Mode.FORBID:
            return True
        return name in self.groups.get(Mode.FORBID.value, ())

    def protections_for(self, name: str) -> list[Protection]:
        return [p for p in self.protections if name in p.protected]


def _service(raw: Mapping[str, Any]) -> ServiceSpec:
    try:
        return ServiceSpec(
            name=raw["name"],
            path=raw.get("path", ""),
            mode=Mode(raw.get("type", "normal")),
            enabled=bool(raw.get("enabled", True)),
            restart_on_failure=bool(raw.get("restart_on_failure", True)),
            restart_max_attempts=int(raw.get("restart_max_attempts", DEFAULT_RESTART_MAX_ATTEMPTS)),
            priority=int(raw.get("priority", 0)),
            config_path=raw.get("config"),
            description=raw.get("description", ""),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad service entry {raw!r}: {exc}") from exc


def _command(raw: Mapping[str, Any]) -> CommandSpec:
    try:
        timeout = raw.get("timeout")
        return CommandSpec(
            name=raw["name"],
            command=raw.get("command", ""),
            mode=Mode(raw.get("type", "normal")),
            priority=int(raw.get("priority", 0)),
            timeout_ms=None if timeout is None else int(timeout),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad command entry {raw!r}: {exc}") from exc


def config_from_dict(doc: Mapping[str, Any]) -> MasterConfig:
    if not isinstance(doc, Mapping):
        raise ParseError("config root must be an object")
    try:
        protections = [
            Protection(p["service"], tuple(p.get("protect_services", ())), float(p.get("min_uptime", 0)))
            for p in doc.get("service_protections", ())
        ]
        batches = [Batch(BatchKind(b["type"]), tuple(b.get("items", ())))
                   for b in doc.get("startup_sequence", ())]
        runtime = doc.get("runtime", {})
        rpc = doc.get("rpc_interface", {})
        return MasterConfig(
            services=[_service(s) for s in doc.get("services", ())],
            commands=[_command(c) for c in doc.get("commands", ())],
            groups={k: list(v) for k, v in doc.get("service_groups", {}).items()},
            protections=protections,
            startup_sequence=batches,
            monitor_interval_ms=int(runtime.get("monitor_interval", DEFAULT_MONITOR_INTERVAL_MS)),
            global_protection_restart_cap=int(
                runtime.get("global_protection_restart_cap", DEFAULT_GLOBAL_PROTECTION_CAP)),
            rpc_handlers=list(rpc.get("handlers", ())),
            socket_path=rpc.get("socket_path"),
        )
    except ParseError:
        raise
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed config: {exc}") from exc


def load_config(data: bytes, crypto=None, identity: Optional[DeviceIdentity] = None) -> MasterConfig:
    """Parse a config from plain JSON bytes or an FMX container.

    `crypto` is a PipelineConfig; it is required only when the input carries
    the FMX magic. Plain JSON passes straight through.
    """
    if data[:4] == MAGIC:
        if crypto is None or identity is None:
            raise ParseError("config is FMX-wrapped but no pipeline config and identity were given")
        from ..pipeline import load
        data = load(data, identity, crypto)
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def reference_config_bytes() -> bytes:
    return resources.files("fmxkit.data").joinpath("master_service.json").read_bytes()


def reference_config() -> MasterConfig:
    return load_config(reference_config_bytes())


@dataclass(frozen=True)
class PlanWarning:
    name: str
    reason: str


@dataclass
class StartupPlan:
    batches: list[Batch]
    warnings: list[PlanWarning] = field(default_factory=list)

    def names(self) -> list[str]:
        return [n for b in self.batches for n in b.names]


def plan_startup(cfg: MasterConfig, include_unsequenced: bool = False) -> StartupPlan:
    """Order the configured startup batches.

    Forbidden, manual and disabled services are dropped with a warning;
    batches left empty are dropped too. With `include_unsequenced`, autostart
    services and once-commands never mentioned in the sequence are appended
    as trailing batches.
    """
    services = cfg.service_map()
    commands = cfg.command_map()
    warnings: list[PlanWarning] = []
    batches: list[Batch] = []
    for batch in cfg.startup_sequence:
        keep = []
        for name in batch.names:
            if batch.kind is BatchKind.COMMAND:
                if name not in commands:
                    raise UnknownName(name)
                keep.append(name)
                continue
            spec = services.get(name)
            if spec is None:
                raise UnknownName(name)
            if cfg.is_forbidden(name):
                reason = "forbidden"
            elif spec.mode is Mode.MANUAL:
                reason = "manual"
            elif not spec.enabled:
                reason = "disabled"
            else:
                keep.append(name)
                continue
            warnings.append(PlanWarning(name, reason))
            log.warning("startup plan skips %s (%s)", name, reason)
        if keep:
            batches.append(Batch(batch.kind, tuple(keep)))

    if include_unsequenced:
        listed = {n for b in cfg.startup_sequence for n in b.names}
        cmds = tuple(c.name for c in cfg.commands if c.name not in listed)
        svcs = tuple(s.name for s in cfg.services
                     if s.name not in listed and s.autostart and not cfg.is_forbidden(s.name))
        if cmds:
            batches.append(Batch(BatchKind.COMMAND, cmds))
        if svcs:
            batches.append(Batch(BatchKind.SERVICE, svcs))
    return StartupPlan(batches, warnings)
