"""Deterministic simulation of the master-service supervisor.

Everything runs on a logical millisecond clock. Child processes are scripted
(see `ScriptedExecutor`), so restarts, protection windows and monitor ticks
can be reproduced exactly.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any, Callable, Mapping, Optional, Protocol

from ..errors import (ForbiddenService, IllegalTransition, UnknownCommand,
                      UnknownHandler, UnknownService)
from .config import (BatchKind, MasterConfig, ServiceSpec, StartupPlan,
                     plan_startup)

log = logging.getLogger(__name__)


class State(Enum):
    STOPPED = 0
    STARTING = 1
    RUNNING = 2
    STOPPING = 3
    FAILED = 4


LIFECYCLE: dict[State, frozenset[State]] = {
    State.STOPPED: frozenset({State.STARTING}),
    State.STARTING: frozenset({State.RUNNING, State.FAILED, State.STOPPING}),
    State.RUNNING: frozenset({State.STOPPING, State.FAILED}),
    State.STOPPING: frozenset({State.STOPPED}),
    State.FAILED: frozenset({State.STARTING, State.STOPPED}),
}


def is_legal(src: State, dst: State) -> bool:
    return dst in LIFECYCLE[src]


# --- scripted children -------------------------------------------------------

@dataclass
class ServiceScript:
    """How a simulated service behaves across successive launches.

    lifetimes[i] is how long run i stays up once RUNNING (None means forever);
    runs past the end of the list use `default_lifetime`.
    """
    lifetimes: list[Optional[int]] = field(default_factory=list)
    default_lifetime: Optional[int] = None
    start_fails: int = 0
    start_delay_ms: int = 0


@dataclass
class CommandScript:
    exit_code: int = 0
    duration_ms: int = 0


@dataclass(frozen=True)
class Launch:
    pid: int
    ok: bool
    ready_delay_ms: int
    lifetime_ms: Optional[int]


class Executor(Protocol):
    def spawn(self, name: str) -> Launch: ...

    def run_command(self, name: str) -> CommandScript: ...


class ScriptedExecutor:
    """Executor whose children follow per-name scripts; unknown names are healthy."""

    def __init__(self, services: Optional[Mapping[str, ServiceScript]] = None,
                 commands: Optional[Mapping[str, CommandScript]] = None,
                 first_pid: int = 1000):
        self.services = dict(services or {})
        self.commands = dict(commands or {})
        self._next_pid = first_pid
        self._attempts: dict[str, int] = {}
        self._runs: dict[str, int] = {}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ScriptedExecutor":
        services = {
            name: ServiceScript(
                lifetimes=list(s.get("lifetimes", [])),
                default_lifetime=s.get("default_lifetime"),
                start_fails=int(s.get("start_fails", 0)),
                start_delay_ms=int(s.get("start_delay_ms", 0)),
            )
            for name, s in doc.get("services", {}).items()
        }
        commands = {
            name: CommandScript(int(c.get("exit_code", 0)), int(c.get("duration_ms", 0)))
            for name, c in doc.get("commands", {}).items()
        }
        return cls(services, commands)

    def spawn(self, name: str) -> Launch:
        script = self.services.get(name, ServiceScript())
        attempt = self._attempts.get(name, 0)
        self._attempts[name] = attempt + 1
        pid = self._next_pid
        self._next_pid += 1
        if attempt < script.start_fails:
            return Launch(pid, False, 0, None)
        run = self._runs.get(name, 0)
        self._runs[name] = run + 1
        lifetime = script.lifetimes[run] if run < len(script.lifetimes) else script.default_lifetime
        return Launch(pid, True, script.start_delay_ms, lifetime)

    def run_command(self, name: str) -> CommandScript:
        return self.commands.get(name, CommandScript())


# --- runtime state -----------------------------------------------------------

class SimClock:
    def __init__(self, start_ms: int = 0):
        self.now_ms = start_ms


@dataclass
class ServiceRuntime:
    state: State = State.STOPPED
    pid: int = 0
    restart_count: int = 0
    start_time: Optional[int] = None
    alive: bool = False
    pending_restart: bool = False


@dataclass
class CommandRuntime:
    command: str
    exit_code: int = -1
    executed: bool = False
    last_execution: Optional[int] = None


class EventLog:
    """Append-only record of transitions and notable events."""

    def __init__(self, sink: Optional[IO[str]] = None):
        self.entries: list[dict[str, Any]] = []
        self._sink = sink

    def record(self, t: int, subject: str, event: str, **extra: Any) -> None:
        entry = {"t_ms": t, "subject": subject, "event": event, **extra}
        self.entries.append(entry)
        if self._sink is not None:
            self._sink.write(json.dumps(entry, sort_keys=True) + "\n")

    def transitions(self) -> list[dict[str, Any]]:
        return [e for e in self.entries if e["event"] == "transition"]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.entries)


@dataclass(frozen=True)
class Action:
    kind: str  # died, restart, defer, give_up, cap_suppressed
    service: str
    detail: str = ""


@dataclass(frozen=True)
class StartupItem:
    kind: BatchKind
    name: str
    ok: bool
    t_ms: int
    detail: str = ""


@dataclass
class StartupReport:
    items: list[StartupItem] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[StartupItem]:
        return [i for i in self.items if not i.ok]


RPC_HANDLERS = (
    "GetServiceState", "ListServiceState", "StartService", "StopService",
    "RestartService", "ReloadService", "RemoveService", "GetServiceEnable",
    "GetCmdState", "ListCmdState", "ExecuteCmd", "RemoveCmd",
)


# --- the supervisor ----------------------------------------------------------

class Orchestrator:
    def __init__(self, cfg: MasterConfig, executor: Optional[Executor] = None,
                 clock: Optional[SimClock] = None, event_log: Optional[EventLog] = None,
                 reload_source: Optional[Callable[[], MasterConfig]] = None):
        self.cfg = cfg
        self.executor = executor or ScriptedExecutor()
        self.clock = clock or SimClock()
        self.log = event_log or EventLog()
        self.reload_source = reload_source
        self.specs: dict[str, ServiceSpec] = cfg.service_map()
        self.runtime: dict[str, ServiceRuntime] = {n: ServiceRuntime() for n in self.specs}
        self.commands: dict[str, CommandRuntime] = {
            c.name: CommandRuntime(c.command) for c in cfg.commands}
        self.protections = list(cfg.protections)
        self.protection_restarts = 0
        self._queue: list[tuple[int, int, str, str, int]] = []
        self._seq = 0
        self._monitoring = False
        self._lifetimes: dict[str, Optional[int]] = {}
        enabled = set(cfg.rpc_handlers) if cfg.rpc_handlers else set(RPC_HANDLERS)
        self._handlers: dict[str, Callable[[dict[str, Any]], Any]] = {
            name: getattr(self, "_rpc_" + name) for name in RPC_HANDLERS if name in enabled}

    @property
    def now(self) -> int:
        return self.clock.now_ms

    # event queue

    def _schedule(self, t: int, kind: str, name: str = "", pid: int = 0) -> None:
        heapq.heappush(self._queue, (t, self._seq, kind, name, pid))
        self._seq += 1

    def advance_to(self, t: int) -> None:
        while self._queue and self._queue[0][0] <= t:
            when, _, kind, name, pid = heapq.heappop(self._queue)
            self.clock.now_ms = max(self.clock.now_ms, when)
            self._dispatch_event(kind, name, pid)
        self.clock.now_ms = max(self.clock.now_ms, t)

    def advance(self, ms: int) -> None:
        self.advance_to(self.now + ms)

    def _dispatch_event(self, kind: str, name: str, pid: int) -> None:
        if kind == "tick":
            if self._monitoring:
                self.monitor_tick()
                self._schedule(self.now + self.cfg.monitor_interval_ms, "tick")
            return
        rt = self.runtime.get(name)
        if rt is None or rt.pid != pid:
            return  # stale event for an earlier incarnation
        if kind == "ready" and rt.state is State.STARTING:
            self._became_running(name, rt)
        elif kind == "exit" and rt.alive:
            self.kill(name)

    # lifecycle

    def _transition(self, name: str, rt: ServiceRuntime, dst: State) -> None:
        src = rt.state
        if not is_legal(src, dst):
            raise IllegalTransition(f"{name}: {src.name} -> {dst.name}")
        rt.state = dst
        self.log.record(self.now, name, "transition", src=src.name, dst=dst.name)

    def _launch(self, name: str) -> None:
        if self.cfg.is_forbidden(name):
            raise ForbiddenService(name)
        rt = self.runtime[name]
        self._transition(name, rt, State.STARTING)
        launch = self.executor.spawn(name)
        rt.pid = launch.pid
        rt.pending_restart = False
        if not launch.ok:
            self.log.record(self.now, name, "start_failure", pid=launch.pid)
            self._transition(name, rt, State.FAILED)
            rt.pending_restart = True
            return
        rt.alive = True
        self._lifetimes[name] = launch.lifetime_ms
        if launch.ready_delay_ms <= 0:
            self._became_running(name, rt)
        else:
            self._schedule(self.now + launch.ready_delay_ms, "ready", name, rt.pid)

    def _became_running(self, name: str, rt: ServiceRuntime) -> None:
        self._transition(name, rt, State.RUNNING)
        rt.start_time = self.now
        lifetime = self._lifetimes.get(name)
        if lifetime is not None:
            self._schedule(self.now + lifetime, "exit", name, rt.pid)

    def kill(self, name: str) -> bool:
        """Simulate the child process dying; the monitor notices on its next tick."""
        rt = self.runtime.get(name)
        if rt is None or not rt.alive:
            return False
        rt.alive = False
        self.log.record(self.now, name, "exit", pid=rt.pid)
        if rt.state is State.STARTING:
            self._transition(name, rt, State.FAILED)
            rt.pending_restart = True
        return True

    def _stop(self, name: str) -> None:
        rt = self.runtime[name]
        if rt.state in (State.STARTING, State.RUNNING):
            self._transition(name, rt, State.STOPPING)
            self._transition(name, rt, State.STOPPED)
        elif rt.state is State.FAILED:
            self._transition(name, rt, State.STOPPED)
        rt.alive = False
        rt.pid = 0
        rt.start_time = None
        rt.pending_restart = False

    def uptime_ms(self, name: str) -> Optional[int]:
        rt = self.runtime.get(name)
        if rt is None or rt.state is not State.RUNNING or not rt.alive or rt.start_time is None:
            return None
        return self.now - rt.start_time

    # commands

    def execute_command(self, name: str) -> CommandRuntime:
        cmd = self.commands.get(name)
        if cmd is None:
            raise UnknownCommand(name)
        started = self.now
        result = self.executor.run_command(name)
        self.advance(result.duration_ms)
        cmd.exit_code = result.exit_code
        cmd.executed = True
        cmd.last_execution = started
        self.log.record(self.now, name, "command", exit_code=result.exit_code)
        return cmd

    # startup and monitoring

    def run_startup(self, plan: Optional[StartupPlan] = None) -> StartupReport:
        """Run the batches in order; failures are recorded and startup goes on.

        Without an explicit plan, autostart entries missing from the configured
        sequence are started last.
        """
        plan = plan if plan is not None else plan_startup(self.cfg, include_unsequenced=True)
        report = StartupReport(warnings=[f"{w.name}: {w.reason}" for w in plan.warnings])
        for batch in plan.batches:
            if batch.kind is BatchKind.COMMAND:
                for name in batch.names:
                    cmd = self.execute_command(name)
                    ok = cmd.exit_code == 0
                    if not ok:
                        log.warning("command %s exited with %d", name, cmd.exit_code)
                    report.items.append(StartupItem(batch.kind, name, ok, self.now,
                                                    f"exit {cmd.exit_code}"))
                continue
            launched = []
            for name in batch.names:
                if name not in self.runtime:
                    raise UnknownService(name)
                if self.runtime[name].state in (State.STOPPED, State.FAILED):
                    self._launch(name)
                launched.append(name)
            # Let the batch settle before moving on.
            while any(self.runtime[n].state is State.STARTING for n in launched) and self._queue:
                self.advance_to(self._queue[0][0])
            for name in launched:
                rt = self.runtime[name]
                ok = rt.state is State.RUNNING
                if not ok:
                    log.warning("service %s failed to start", name)
                report.items.append(StartupItem(batch.kind, name, ok, self.now, rt.state.name))
        return report

    def start_monitoring(self) -> None:
        if not self._monitoring:
            self._monitoring = True
            self._schedule(self.now + self.cfg.monitor_interval_ms, "tick")

    def start(self, plan: Optional[StartupPlan] = None) -> StartupReport:
        report = self.run_startup(plan)
        self.start_monitoring()
        return report

    def _guardian_blocking(self, name: str) -> Optional[str]:
        for p in self.protections:
            if name not in p.protected:
                continue
            up = self.uptime_ms(p.guardian)
            if up is None or up < p.min_uptime * 1000:
                return p.guardian
        return None

    def monitor_tick(self) -> list[Action]:
        actions: list[Action] = []
        for name, spec in self.specs.items():
            rt = self.runtime[name]
            if not spec.enabled:
                continue
            if rt.state is State.RUNNING and not rt.alive:
                log.info("service %s died, restarting", name)
                self._transition(name, rt, State.FAILED)
                rt.pending_restart = True
                actions.append(Action("died", name))
            if rt.state is not State.FAILED or not rt.pending_restart:
                continue
            if not spec.restart_on_failure:
                rt.pending_restart = False
                actions.append(Action("give_up", name, "restart disabled"))
                continue
            if rt.restart_count >= spec.restart_max_attempts:
                rt.pending_restart = False
                actions.append(Action("give_up", name, "restart attempts exhausted"))
                continue
            protected = any(name in p.protected for p in self.protections)
            if protected:
                guardian = self._guardian_blocking(name)
                if guardian is not None:
                    actions.append(Action("defer", name, guardian))
                    continue
                if self.protection_restarts >= self.cfg.global_protection_restart_cap:
                    rt.pending_restart = False
                    actions.append(Action("cap_suppressed", name))
                    continue
                self.protection_restarts += 1
            rt.restart_count += 1
            self._launch(name)
            actions.append(Action("restart", name, f"attempt {rt.restart_count}"))
        for a in actions:
            if a.kind != "died":
                self.log.record(self.now, a.service, a.kind, detail=a.detail)
        return actions

    # RPC

    def dispatch(self, method: str, params: Optional[Mapping[str, Any]] = None) -> Any:
        handler = self._handlers.get(method)
        if handler is None:
            raise UnknownHandler(method)
        return handler(dict(params or {}))

    def handle_request(self, request: Mapping[str, Any]) -> dict[str, Any]:
        """Turn one request document into a response document."""
        rid = request.get("id")
        try:
            method = request.get("method")
            if not isinstance(method, str):
                raise UnknownHandler(repr(method))
            params = request.get("params") or {}
            if not isinstance(params, Mapping):
                raise UnknownHandler("params must be an object")
            return {"id": rid, "result": self.dispatch(method, params), "error": None}
        except (UnknownHandler, UnknownService, UnknownCommand, ForbiddenService) as exc:
            return {"id": rid, "result": None,
                    "error": {"type": type(exc).__name__, "message": str(exc)}}

    def _service_name(self, params: Mapping[str, Any]) -> str:
        name = params.get("name")
        if name not in self.specs:
            raise UnknownService(str(name))
        return name

    def _command_name(self, params: Mapping[str, Any]) -> str:
        name = params.get("name")
        if name not in self.commands:
            raise UnknownCommand(str(name))
        return name

    def service_state(self, name: str) -> dict[str, Any]:
        spec, rt = self.specs[name], self.runtime[name]
        return {
            "name": name, "state": rt.state.name, "pid": rt.pid,
            "restart_count": rt.restart_count, "start_time": rt.start_time,
            "mode": spec.mode.name, "enabled": spec.enabled,
        }

    def _rpc_GetServiceState(self, params):
        return self.service_state(self._service_name(params))

    def _rpc_ListServiceState(self, params):
        return [self.service_state(n) for n in self.specs]

    def _start_by_operator(self, name: str) -> None:
        if self.cfg.is_forbidden(name):
            raise ForbiddenService(name)
        rt = self.runtime[name]
        if rt.state in (State.STARTING, State.RUNNING) and rt.alive:
            return
        if rt.state is State.RUNNING:
            self._transition(name, rt, State.FAILED)  # dead but not yet noticed
        rt.restart_count = 0
        self._launch(name)

    def _rpc_StartService(self, params):
        name = self._service_name(params)
        self._start_by_operator(name)
        return self.service_state(name)

    def _rpc_StopService(self, params):
        name = self._service_name(params)
        self._stop(name)
        return self.service_state(name)

    def _rpc_RestartService(self, params):
        name = self._service_name(params)
        if self.cfg.is_forbidden(name):
            raise ForbiddenService(name)
        self._stop(name)
        self._start_by_operator(name)
        return self.service_state(name)

    def _rpc_ReloadService(self, params):
        """Re-read the service spec from the config source, then restart it."""
        name = self._service_name(params)
        if self.reload_source is not None:
            fresh = self.reload_source()
            spec = fresh.service_map().get(name)
            if spec is None:
                raise UnknownService(name)
            self.specs[name] = spec
        return self._rpc_RestartService(params)

    def _rpc_RemoveService(self, params):
        name = self._service_name(params)
        self._stop(name)
        del self.specs[name]
        del self.runtime[name]
        self.protections = [
            type(p)(p.guardian, tuple(n for n in p.protected if n != name), p.min_uptime)
            for p in self.protections if p.guardian != name
        ]
        self.log.record(self.now, name, "removed")
        return {"name": name, "removed": True}

    def _rpc_GetServiceEnable(self, params):
        name = self._service_name(params)
        return {"name": name, "enabled": self.specs[name].enabled}

    def _cmd_state(self, name: str) -> dict[str, Any]:
        c = self.commands[name]
        return {"name": name, "command": c.command, "exit_code": c.exit_code,
                "executed": c.executed, "last_execution": c.last_execution}

    def _rpc_GetCmdState(self, params):
        return self._cmd_state(self._command_name(params))

    def _rpc_ListCmdState(self, params):
        return [self._cmd_state(n) for n in self.commands]

    def _rpc_ExecuteCmd(self, params):
        name = self._command_name(params)
        self.execute_command(name)
        return self._cmd_state(name)

    def _rpc_RemoveCmd(self, params):
        name = self._command_name(params)
        del self.commands[name]
        self.log.record(self.now, name, "removed")
        return {"name": name, "removed": True}
