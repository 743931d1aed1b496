"""reportState payload model: parse and synthesize."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from numbers import Real
from typing import Any, Mapping, Optional

from ..errors import SchemaError

REPORT_CMD = "reportState"

Path = tuple[str, ...]


def _num(value: Any, what: str) -> Any:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise SchemaError(f"{what} must be a number, got {value!r}")
    return value


def _int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{what} must be an integer, got {value!r}")
    return value


def _nums(value: Any, what: str) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise SchemaError(f"{what} must be a list")
    return tuple(_num(v, what) for v in value)


@dataclass(frozen=True)
class Battery:
    cell_voltages: tuple[int, ...]  # mV
    current: int  # mA, negative while discharging
    soc: Any  # percent
    temperatures: tuple[Any, ...]

    def __post_init__(self) -> None:
        _num(self.soc, "soc")
        if not 0 <= self.soc <= 100:
            raise SchemaError(f"soc {self.soc} outside [0, 100]")
        _int(self.current, "current")


@dataclass(frozen=True)
class Imu:
    pitch: float
    roll: float
    yaw: float


@dataclass(frozen=True)
class Motor:
    position: float  # rad
    temperatures: tuple[Any, ...]
    voltage: float


@dataclass(frozen=True)
class ServiceStatus:
    name: str
    status: int  # opaque code


@dataclass(frozen=True)
class Resource:
    cpu: tuple[float, ...]
    mem_total: int
    mem_used: int

    def __post_init__(self) -> None:
        _int(self.mem_total, "mem.total")
        _int(self.mem_used, "mem.used")
        if not 0 <= self.mem_used <= self.mem_total:
            raise SchemaError(f"mem.used {self.mem_used} not within [0, {self.mem_total}]")


@dataclass(frozen=True)
class ReportState:
    msg_id: str
    battery: Optional[Battery] = None
    imu: Optional[Imu] = None
    motors: tuple[Motor, ...] = ()
    services: tuple[ServiceStatus, ...] = ()
    resource: Optional[Resource] = None
    # Unknown keys, keyed by their path from the document root.
    extras: Mapping[Path, Any] = field(default_factory=dict)
    cmd: str = REPORT_CMD

    def __post_init__(self) -> None:
        if self.cmd != REPORT_CMD:
            raise SchemaError(f"cmd must be {REPORT_CMD!r}, got {self.cmd!r}")
        if not (isinstance(self.msg_id, str) and self.msg_id.isdigit() and self.msg_id.isascii()):
            raise SchemaError(f"msgId must be a decimal string, got {self.msg_id!r}")

    @property
    def timestamp_us(self) -> int:
        return int(self.msg_id)


def _section(doc: Mapping[str, Any], key: str, path: Path) -> Optional[Mapping[str, Any]]:
    value = doc.get(key)
    if value is None:
        return None
    if not isinstance(value, Mapping):
        raise SchemaError(f"{'.'.join(path + (key,))} must be an object")
    return value


def _collect_extras(doc: Mapping[str, Any], known: set[str], path: Path,
                    extras: dict[Path, Any]) -> None:
    for k, v in doc.items():
        if k not in known:
            extras[path + (k,)] = v


def parse_report(text: str | bytes) -> ReportState:
    try:
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"not JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise SchemaError("report must be a JSON object")
    return report_from_dict(doc)


def report_from_dict(doc: Mapping[str, Any]) -> ReportState:
    if doc.get("cmd") != REPORT_CMD:
        raise SchemaError(f"cmd must be {REPORT_CMD!r}, got {doc.get('cmd')!r}")
    if "msgId" not in doc:
        raise SchemaError("msgId missing")
    extras: dict[Path, Any] = {}
    _collect_extras(doc, {"cmd", "msgId", "state"}, (), extras)
    state = _section(doc, "state", ()) or {}
    _collect_extras(state, {"low", "module", "resource"}, ("state",), extras)
    low = _section(state, "low", ("state",)) or {}
    _collect_extras(low, {"bmsHg", "imu", "motorHg"}, ("state", "low"), extras)
    module = _section(state, "module", ("state",)) or {}
    _collect_extras(module, {"service"}, ("state", "module"), extras)

    try:
        battery = None
        bms = _section(low, "bmsHg", ("state", "low"))
        if bms is not None:
            _collect_extras(bms, {"cellVoltage", "current", "soc", "temperature"},
                            ("state", "low", "bmsHg"), extras)
            battery = Battery(
                cell_voltages=_nums(bms.get("cellVoltage", []), "cellVoltage"),
                current=_int(bms["current"], "current"),
                soc=_num(bms["soc"], "soc"),
                temperatures=_nums(bms.get("temperature", []), "temperature"),
            )
        imu = None
        raw_imu = _section(low, "imu", ("state", "low"))
        if raw_imu is not None:
            _collect_extras(raw_imu, {"pitch", "roll", "yaw"}, ("state", "low", "imu"), extras)
            imu = Imu(*(_num(raw_imu[k], k) for k in ("pitch", "roll", "yaw")))
        motors = tuple(
            Motor(_num(m["position"], "position"), _nums(m.get("temperature", []), "temperature"),
                  _num(m["voltage"], "voltage"))
            for m in low.get("motorHg", [])
        )
        services = tuple(
            ServiceStatus(str(s["name"]), _int(s["status"], "status"))
            for s in module.get("service", [])
        )
        resource = None
        raw_res = _section(state, "resource", ("state",))
        if raw_res is not None:
            _collect_extras(raw_res, {"cpu", "mem"}, ("state", "resource"), extras)
            mem = raw_res.get("mem") or {}
            resource = Resource(_nums(raw_res.get("cpu", []), "cpu"),
                                _int(mem["total"], "mem.total"), _int(mem["used"], "mem.used"))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed report field: {exc}") from exc

    msg_id = doc["msgId"]
    if isinstance(msg_id, int) and not isinstance(msg_id, bool):
        msg_id = str(msg_id)
    return ReportState(msg_id=msg_id, battery=battery, imu=imu, motors=motors,
                       services=services, resource=resource, extras=extras)


def _put(doc: dict[str, Any], path: Path, value: Any) -> None:
    node = doc
    for k in path[:-1]:
        node = node.setdefault(k, {})
    node[path[-1]] = value


def report_to_dict(state: ReportState, clock_us: Optional[int] = None) -> dict[str, Any]:
    msg_id = state.msg_id if clock_us is None else str(clock_us)
    low: dict[str, Any] = {}
    if state.battery is not None:
        b = state.battery
        low["bmsHg"] = {"cellVoltage": list(b.cell_voltages), "current": b.current,
                        "soc": b.soc, "temperature": list(b.temperatures)}
    if state.imu is not None:
        low["imu"] = {"pitch": state.imu.pitch, "roll": state.imu.roll, "yaw": state.imu.yaw}
    if state.motors:
        low["motorHg"] = [{"position": m.position, "temperature": list(m.temperatures),
                           "voltage": m.voltage} for m in state.motors]
    body: dict[str, Any] = {}
    if low:
        body["low"] = low
    if state.services:
        body["module"] = {"service": [{"name": s.name, "status": s.status} for s in state.services]}
    if state.resource is not None:
        r = state.resource
        body["resource"] = {"cpu": list(r.cpu), "mem": {"total": r.mem_total, "used": r.mem_used}}
    doc: dict[str, Any] = {"cmd": state.cmd, "msgId": msg_id, "state": body}
    for path, value in state.extras.items():
        _put(doc, path, value)
    return doc


def synthesize_report(state: ReportState, clock_us: Optional[int] = None) -> str:
    """Render a report as JSON text; `clock_us` overrides the message id."""
    return json.dumps(report_to_dict(state, clock_us), separators=(",", ":"))


def sample_report_text() -> str:
    return resources.files("fmxkit.data").joinpath("telemetry_sample.json").read_text()
