import dataclasses
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmxkit.errors import ParseError, UnknownName
from fmxkit.lcg import FIXTURE_IDENTITY
from fmxkit.orchestrator import (RPC_HANDLERS, BatchKind, CommandScript,
                                 Mode, Orchestrator, ScriptedExecutor,
                                 ServiceScript, State, config_from_dict,
                                 fuzz_lifecycle, load_config, plan_startup,
                                 reference_config, reference_config_bytes)
from fmxkit.orchestrator.sim import is_legal
from fmxkit.pipeline import PipelineConfig, wrap

APPENDIX_SEQUENCE = [
    ("command", ["net-init", "ota-box", "ota-update"]),
    ("command", ["pw-init", "st-init", "ds-init"]),
    ("command", ["pd-init", "lo-multicast"]),
    ("service", ["upper_bluetooth"]),
    ("service", ["iox-roudi"]),
    ("service", ["basic_service"]),
    ("command", ["am-init", "core-init", "deb-update"]),
    ("service", ["ai_sport", "state_estimator", "robot_state"]),
    ("service", ["motion_switcher", "ros_bridge"]),
    ("service", ["dex3_service_l", "dex3_service_r"]),
    ("service", ["chat_go", "vui_service"]),
    ("service", ["video_hub", "webrtc_bridge", "webrtc_signal_server"]),
    ("service", ["net_switcher", "bashrunner", "ota_box"]),
]


@pytest.fixture
def cfg():
    return reference_config()


def _doc():
    return json.loads(reference_config_bytes())


def _events(orch, name, skip=("transition",)):
    return [(e["t_ms"], e["event"], e.get("detail")) for e in orch.log.entries
            if e["subject"] == name and e["event"] not in skip]


# config loading

def test_reference_inventory(cfg):
    assert len(cfg.services) == 22
    assert len(cfg.commands) == 12
    assert cfg.monitor_interval_ms == 5000
    assert cfg.global_protection_restart_cap == 30
    assert cfg.rpc_handlers == list(RPC_HANDLERS)
    specs = cfg.service_map()
    assert specs["iox-roudi"].restart_max_attempts == 3
    assert specs["basic_service"].restart_max_attempts == 3  # default
    assert specs["g1_arm_example"].mode is Mode.MANUAL and not specs["g1_arm_example"].enabled
    assert [p.min_uptime for p in cfg.protections] == [10, 5, 5]


def test_fmx_wrapped_config(cfg):
    crypto = PipelineConfig(b"synthetic-key-16")
    blob = wrap(reference_config_bytes(), FIXTURE_IDENTITY, crypto)
    assert load_config(blob, crypto, FIXTURE_IDENTITY) == cfg
    with pytest.raises(ParseError):
        load_config(blob)


@pytest.mark.parametrize("data", [
    reference_config_bytes()[:500],
    b"[]",
    b"\xff\xfe",
    json.dumps({"services": [{"path": "/x"}]}).encode(),
    json.dumps({"services": [{"name": "a", "type": "bogus"}]}).encode(),
])
def test_parse_errors(data):
    with pytest.raises(ParseError):
        load_config(data)


def test_consistency_checks():
    doc = _doc()
    doc["services"].append(dict(doc["services"][0]))
    with pytest.raises(ParseError, match="duplicate"):
        config_from_dict(doc)
    doc = _doc()
    doc["service_groups"]["prio"].append("chat_go")
    with pytest.raises(ParseError, match="type"):
        config_from_dict(doc)
    doc = _doc()
    doc["service_protections"][0]["protect_services"].append("ghost")
    with pytest.raises(ParseError, match="unknown"):
        config_from_dict(doc)


# startup planning

def test_plan_reproduces_sequence(cfg):
    plan = plan_startup(cfg)
    assert [(b.kind.value, list(b.names)) for b in plan.batches] == APPENDIX_SEQUENCE
    assert plan.warnings == []


def test_plan_filters_forbidden_and_manual():
    doc = _doc()
    doc["service_groups"]["forbid"] = ["chat_go"]
    doc["startup_sequence"][10]["items"].append("g1_arm_example")
    cfg = config_from_dict(doc)
    plan = plan_startup(cfg)
    names = plan.names()
    assert "chat_go" not in names and "g1_arm_example" not in names
    assert {(w.name, w.reason) for w in plan.warnings} == {
        ("chat_go", "forbidden"), ("g1_arm_example", "manual")}
    assert ["vui_service"] in [list(b.names) for b in plan.batches]


def test_plan_unknown_name():
    doc = _doc()
    doc["startup_sequence"][0]["items"].append("ghost-init")
    with pytest.raises(UnknownName):
        plan_startup(config_from_dict(doc))


def test_plan_empty():
    doc = _doc()
    doc["startup_sequence"] = []
    assert plan_startup(config_from_dict(doc)).batches == []


def test_unsequenced_tail(cfg):
    plan = plan_startup(cfg, include_unsequenced=True)
    assert plan.batches[:13] == plan_startup(cfg).batches
    assert [list(b.names) for b in plan.batches[13:]] == [
        ["sim-apn-verifier"], ["webrtc_multicast_responder"]]


# startup

def test_startup_order_and_terminal_state(cfg):
    orch = Orchestrator(cfg)
    report = orch.start()
    assert report.failures == []
    order = [e["subject"] for e in orch.log.transitions() if e["dst"] == "STARTING"]
    assert order.index("iox-roudi") < order.index("basic_service") < order.index("ai_sport")
    running_before = {e["subject"] for e in orch.log.entries[:next(
        i for i, e in enumerate(orch.log.entries)
        if e["subject"] == "basic_service" and e.get("dst") == "STARTING")]
        if e.get("dst") == "RUNNING"}
    assert "iox-roudi" in running_before
    for spec in cfg.services:
        want = State.RUNNING if spec.autostart else State.STOPPED
        assert orch.runtime[spec.name].state is want, spec.name
    assert all(c.executed and c.exit_code == 0 for c in orch.commands.values())


def test_startup_continues_after_failures(cfg):
    ex = ScriptedExecutor({"iox-roudi": ServiceScript(start_fails=5)},
                          {"net-init": CommandScript(exit_code=3, duration_ms=200)})
    orch = Orchestrator(cfg, ex)
    report = orch.run_startup(plan_startup(cfg))
    failed = {(i.kind, i.name) for i in report.failures}
    assert failed == {(BatchKind.COMMAND, "net-init"), (BatchKind.SERVICE, "iox-roudi")}
    assert orch.runtime["ota_box"].state is State.RUNNING
    assert orch.commands["ota-box"].last_execution == 200


def test_start_delay_settles_batch(cfg):
    ex = ScriptedExecutor({"iox-roudi": ServiceScript(start_delay_ms=1500)})
    orch = Orchestrator(cfg, ex)
    orch.run_startup(plan_startup(cfg))
    assert orch.runtime["iox-roudi"].start_time == 1500
    assert orch.runtime["basic_service"].start_time == 1500


# monitoring

def test_restart_cap(cfg):
    ex = ScriptedExecutor({"net_switcher": ServiceScript(default_lifetime=1000)})
    orch = Orchestrator(cfg, ex)
    orch.start()
    orch.advance(60_000)
    rt = orch.runtime["net_switcher"]
    assert rt.state is State.FAILED and rt.restart_count == 3
    kinds = [k for _, k, _ in _events(orch, "net_switcher")]
    assert kinds == ["exit", "restart"] * 3 + ["exit", "give_up"]


def test_restart_disabled():
    doc = _doc()
    doc["services"][6]["restart_on_failure"] = False  # ros_bridge
    cfg = config_from_dict(doc)
    orch = Orchestrator(cfg, ScriptedExecutor({"ros_bridge": ServiceScript(lifetimes=[100])}))
    orch.start()
    orch.advance(20_000)
    assert orch.runtime["ros_bridge"].state is State.FAILED
    assert orch.runtime["ros_bridge"].restart_count == 0


def test_protection_deferral(cfg):
    # am-init runs after basic_service, so ai_sport starts 4.5 s later and dies
    # 9 s after basic_service came up; the first tick sees basic_service at 9.5 s.
    ex = ScriptedExecutor({"ai_sport": ServiceScript(lifetimes=[4500])},
                          {"am-init": CommandScript(duration_ms=4500)})
    orch = Orchestrator(cfg, ex)
    orch.start()
    basic_up = orch.runtime["basic_service"].start_time
    orch.advance(20_000)
    events = _events(orch, "ai_sport")
    assert events[0] == (basic_up + 9000, "exit", None)
    assert events[1] == (basic_up + 9500, "defer", "basic_service")
    assert events[2] == (basic_up + 14_500, "restart", "attempt 1")
    assert orch.runtime["ai_sport"].state is State.RUNNING


def test_deferral_while_guardian_down(cfg):
    ex = ScriptedExecutor({"iox-roudi": ServiceScript(lifetimes=[100]),
                           "ros_bridge": ServiceScript(lifetimes=[100])})
    orch = Orchestrator(cfg, ex)
    orch.start()
    orch.advance(200)
    actions = orch.monitor_tick()
    # iox-roudi restarts in this tick, so ros_bridge still waits for its uptime.
    assert ("restart", "iox-roudi") in [(a.kind, a.service) for a in actions]
    assert ("defer", "ros_bridge") in [(a.kind, a.service) for a in actions]


def test_global_protection_cap(cfg):
    specs = [dataclasses.replace(s, restart_max_attempts=50) for s in cfg.services]
    cfg = dataclasses.replace(cfg, services=specs)
    protected = {n for p in cfg.protections for n in p.protected} - {"basic_service"}
    ex = ScriptedExecutor({n: ServiceScript(default_lifetime=1000) for n in protected})
    orch = Orchestrator(cfg, ex)
    orch.start()
    orch.advance(600_000)
    restarts = [e for e in orch.log.entries if e["event"] == "restart"]
    assert orch.protection_restarts == 30
    assert len(restarts) == 30
    assert any(e["event"] == "cap_suppressed" for e in orch.log.entries)


def test_cap_is_configurable():
    doc = _doc()
    doc["runtime"]["global_protection_restart_cap"] = 2
    cfg = config_from_dict(doc)
    ex = ScriptedExecutor({"ai_sport": ServiceScript(default_lifetime=20_000)})
    orch = Orchestrator(cfg, ex)
    orch.start()
    orch.advance(300_000)
    assert orch.protection_restarts == 2


def test_ticks_follow_monitor_interval(cfg):
    orch = Orchestrator(cfg)
    orch.start()
    seen = []
    orig = orch.monitor_tick
    orch.monitor_tick = lambda: seen.append(orch.now) or orig()
    orch.advance(25_000)
    assert seen == [5000, 10_000, 15_000, 20_000, 25_000]


# RPC handlers

def test_rpc_surface(cfg):
    orch = Orchestrator(cfg)
    orch.start()
    listing = orch.dispatch("ListServiceState")
    assert len(listing) == 22
    assert orch.dispatch("GetServiceState", {"name": "g1_arm_example"})["state"] == "STOPPED"
    assert orch.dispatch("StartService", {"name": "g1_arm_example"})["state"] == "RUNNING"
    assert orch.dispatch("GetServiceEnable", {"name": "g1_arm_example"}) == {
        "name": "g1_arm_example", "enabled": False}
    assert orch.dispatch("StopService", {"name": "chat_go"})["state"] == "STOPPED"
    before = orch.runtime["vui_service"].pid
    assert orch.dispatch("RestartService", {"name": "vui_service"})["pid"] != before
    assert orch.dispatch("ReloadService", {"name": "vui_service"})["state"] == "RUNNING"
    assert orch.dispatch("RemoveService", {"name": "bashrunner"})["removed"]
    assert len(orch.dispatch("ListServiceState")) == 21
    assert len(orch.dispatch("ListCmdState")) == 12
    assert orch.dispatch("GetCmdState", {"name": "net-init"})["exit_code"] == 0
    assert orch.dispatch("ExecuteCmd", {"name": "sim-apn-verifier"})["executed"]
    assert orch.dispatch("RemoveCmd", {"name": "deb-update"})["removed"]
    assert len(orch.dispatch("ListCmdState")) == 11


def test_stopped_service_is_not_restarted(cfg):
    orch = Orchestrator(cfg)
    orch.start()
    orch.dispatch("StopService", {"name": "chat_go"})
    orch.advance(30_000)
    assert orch.runtime["chat_go"].state is State.STOPPED


@pytest.mark.parametrize("method, params, kind", [
    ("Nope", {}, "UnknownHandler"),
    ("StartService", {"name": "ghost"}, "UnknownService"),
    ("GetServiceState", {}, "UnknownService"),
    ("ExecuteCmd", {"name": "ghost"}, "UnknownCommand"),
])
def test_rpc_errors(cfg, method, params, kind):
    orch = Orchestrator(cfg)
    resp = orch.handle_request({"id": 7, "method": method, "params": params})
    assert resp["id"] == 7 and resp["result"] is None
    assert resp["error"]["type"] == kind


def test_forbidden_service():
    doc = _doc()
    doc["service_groups"]["forbid"] = ["chat_go"]
    orch = Orchestrator(config_from_dict(doc))
    orch.start()
    assert orch.runtime["chat_go"].state is State.STOPPED
    for method in ("StartService", "RestartService"):
        resp = orch.handle_request({"id": 1, "method": method, "params": {"name": "chat_go"}})
        assert resp["error"]["type"] == "ForbiddenService"
    assert orch.runtime["chat_go"].state is State.STOPPED


def test_reload_rereads_spec(cfg):
    doc = _doc()
    doc["services"][17]["restart_max_attempts"] = 9  # net_switcher
    fresh = config_from_dict(doc)
    orch = Orchestrator(cfg, reload_source=lambda: fresh)
    orch.start()
    orch.dispatch("ReloadService", {"name": "net_switcher"})
    assert orch.specs["net_switcher"].restart_max_attempts == 9


def test_handlers_restricted_by_config():
    doc = _doc()
    doc["rpc_interface"]["handlers"] = ["ListServiceState"]
    orch = Orchestrator(config_from_dict(doc))
    assert orch.handle_request({"method": "StopService", "params": {"name": "chat_go"}})[
        "error"]["type"] == "UnknownHandler"


# properties

def _run(cfg, scripts):
    orch = Orchestrator(cfg, ScriptedExecutor(scripts))
    orch.start()
    orch.advance(120_000)
    return orch.log.to_jsonl()


def test_event_log_is_deterministic(cfg):
    scripts = {"ai_sport": ServiceScript(default_lifetime=7000),
               "iox-roudi": ServiceScript(lifetimes=[3000], start_delay_ms=250)}
    assert _run(cfg, scripts) == _run(cfg, scripts)


def test_lifecycle_fuzz(cfg):
    doc = _doc()
    doc["service_groups"]["forbid"] = ["chat_go", "video_hub"]
    fuzz_cfg = config_from_dict(doc)
    for seed in range(3):
        result = fuzz_lifecycle(fuzz_cfg, 3000, seed)
        assert result.illegal == 0
        assert result.forbid_violations == 0
        assert result.protection_restarts <= 30
        assert all(n <= 3 for n in result.max_restarts.values())
    orch = Orchestrator(fuzz_cfg)
    orch.start()
    _audit(orch.log.transitions())


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(
    st.sampled_from([s["name"] for s in json.loads(reference_config_bytes())["services"]]),
    st.builds(ServiceScript,
              lifetimes=st.lists(st.one_of(st.none(), st.integers(1, 20_000)), max_size=4),
              default_lifetime=st.one_of(st.none(), st.integers(1, 20_000)),
              start_fails=st.integers(0, 3),
              start_delay_ms=st.integers(0, 3000)),
    max_size=8))
def test_restart_bounds_hold(scripts):
    cfg = reference_config()
    orch = Orchestrator(cfg, ScriptedExecutor(scripts))
    orch.start()
    orch.advance(200_000)
    for name, rt in orch.runtime.items():
        assert rt.restart_count <= orch.specs[name].restart_max_attempts
    assert orch.protection_restarts <= cfg.global_protection_restart_cap
    _audit(orch.log.transitions())


def _audit(transitions):
    """Every transition is legal and starts from the subject's previous state."""
    last = {}
    for e in transitions:
        src, dst = State[e["src"]], State[e["dst"]]
        assert last.get(e["subject"], State.STOPPED) is src
        assert is_legal(src, dst)
        last[e["subject"]] = dst
