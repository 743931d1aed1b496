"""Randomized lifecycle driver for the supervisor simulation."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .config import MasterConfig
from .sim import (LIFECYCLE, Orchestrator, ScriptedExecutor, ServiceScript,
                  SimClock, State)


@dataclass
class FuzzResult:
    events: int
    transitions: int
    illegal: int
    forbid_violations: int
    max_restarts: dict[str, int]
    protection_restarts: int


def _random_scripts(cfg: MasterConfig, rng: random.Random) -> ScriptedExecutor:
    scripts = {}
    for s in cfg.services:
        scripts[s.name] = ServiceScript(
            lifetimes=[rng.choice([None, rng.randrange(100, 30_000)]) for _ in range(rng.randrange(0, 6))],
            default_lifetime=rng.choice([None, rng.randrange(500, 20_000)]),
            start_fails=rng.randrange(0, 3),
            start_delay_ms=rng.choice([0, 0, rng.randrange(1, 3000)]),
        )
    return ScriptedExecutor(scripts)


def fuzz_lifecycle(cfg: MasterConfig, n_events: int = 10_000, seed: int = 0) -> FuzzResult:
    """Drive `n_events` random child/operator events and audit the event log."""
    rng = random.Random(seed)
    orch = Orchestrator(cfg, _random_scripts(cfg, rng), SimClock())
    orch.start()
    names = [s.name for s in cfg.services]
    forbid_violations = 0
    monitor_restarts: dict[str, int] = {n: 0 for n in names}
    for _ in range(n_events):
        live = [n for n in names if n in orch.runtime]
        if not live:
            break
        name = rng.choice(live)
        roll = rng.random()
        if roll < 0.45:
            orch.kill(name)
        elif roll < 0.75:
            orch.advance(rng.randrange(1, 2 * cfg.monitor_interval_ms))
        elif roll < 0.85:
            orch.handle_request({"method": "StartService", "params": {"name": name}})
        elif roll < 0.93:
            orch.handle_request({"method": "StopService", "params": {"name": name}})
        elif roll < 0.99:
            orch.handle_request({"method": "RestartService", "params": {"name": name}})
        else:
            orch.handle_request({"method": "ReloadService", "params": {"name": name}})
        for n in names:
            rt = orch.runtime.get(n)
            if rt is not None and cfg.is_forbidden(n) and rt.state is not State.STOPPED:
                forbid_violations += 1
            if rt is not None:
                monitor_restarts[n] = max(monitor_restarts[n], rt.restart_count)

    trans = orch.log.transitions()
    illegal = sum(1 for e in trans if State[e["dst"]] not in LIFECYCLE[State[e["src"]]])
    return FuzzResult(n_events, len(trans), illegal, forbid_violations,
                      monitor_restarts, orch.protection_restarts)
