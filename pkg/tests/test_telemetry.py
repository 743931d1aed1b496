import io
import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmxkit.errors import EmptyCapture, SchemaError
from fmxkit.telemetry import (Allowlist, Battery, CaptureRecord,
                              EndpointConfig, Imu, Motor, ReportScheduler,
                              ReportState, Resource, ServiceStatus,
                              analyze_capture, emit_block_rules, parse_report,
                              read_capture, sample_report_text,
                              synthesize_report, synthetic_capture,
                              write_capture)

PRIMARY = "43.175.228.18:17883"
SECONDARY = "43.175.229.18:17883"
MQTT = {
    "ServerUriMap": {"CN": "mqtts://robot-mqtt.unitree.com:17883",
                     "default": "mqtts://global-robot-mqtt.unitree.com:17883"},
    "AutoReconnect": True, "AuthType": 1, "ReconnectInterval": 10,
}


# reports

def test_sample_payload():
    r = parse_report(sample_report_text())
    assert r.battery.soc == 44
    assert r.battery.current == -1327
    assert r.imu.yaw == 22.78
    assert r.msg_id == "1757431580470452"
    assert r.resource.mem_total == 8293978112
    assert r.services == (ServiceStatus("ai_sport", 0),)
    assert r.motors[0].temperatures == (37, 37)


def test_msg_id_from_clock():
    r = parse_report(sample_report_text())
    text = synthesize_report(r, 1757431580470452)
    assert json.loads(text)["msgId"] == "1757431580470452"
    assert parse_report(synthesize_report(r, 5)).msg_id == "5"


def test_nesting_layout():
    doc = json.loads(synthesize_report(parse_report(sample_report_text())))
    assert doc["state"]["low"]["bmsHg"]["soc"] == 44
    assert doc["state"]["low"]["imu"]["yaw"] == 22.78
    assert doc["state"]["module"]["service"][0]["name"] == "ai_sport"
    assert doc["state"]["resource"]["mem"]["used"] == 3145764864


def test_optional_sections_and_extras():
    doc = json.loads(sample_report_text())
    del doc["state"]["low"]["motorHg"]
    doc["state"]["low"]["imu"]["gyro"] = [1, 2, 3]
    doc["seq"] = 9
    r = parse_report(json.dumps(doc))
    assert r.motors == ()
    assert r.extras == {("state", "low", "imu", "gyro"): [1, 2, 3], ("seq",): 9}
    assert json.loads(synthesize_report(r)) == doc


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(cmd="foo"),
    lambda d: d.pop("msgId"),
    lambda d: d.update(msgId="12ab"),
    lambda d: d["state"]["low"]["bmsHg"].update(soc=101),
    lambda d: d["state"]["low"]["bmsHg"].update(current="x"),
    lambda d: d["state"]["resource"]["mem"].update(used=10**12),
    lambda d: d["state"]["low"].update(imu=[]),
    lambda d: d["state"]["low"]["imu"].pop("yaw"),
])
def test_schema_errors(mutate):
    doc = json.loads(sample_report_text())
    mutate(doc)
    with pytest.raises(SchemaError):
        parse_report(json.dumps(doc))


def test_construction_invariants():
    with pytest.raises(SchemaError):
        Battery((3700,), -10, 101, ())
    with pytest.raises(SchemaError):
        Resource((0.1,), 100, 101)
    with pytest.raises(SchemaError):
        ReportState("1", cmd="other")
    with pytest.raises(SchemaError):
        parse_report("not json")


finite = st.floats(allow_nan=False, allow_infinity=False)
names = st.text(st.characters(min_codepoint=32, max_codepoint=0x2FFF), max_size=12)

snapshots = st.builds(
    ReportState,
    msg_id=st.integers(0, 2**63).map(str),
    battery=st.one_of(st.none(), st.builds(
        Battery, st.lists(st.integers(0, 5000), max_size=8).map(tuple),
        st.integers(-50_000, 50_000), st.one_of(st.integers(0, 100), st.floats(0, 100)),
        st.lists(st.integers(-40, 120), max_size=6).map(tuple))),
    imu=st.one_of(st.none(), st.builds(Imu, finite, finite, finite)),
    motors=st.lists(st.builds(Motor, finite, st.lists(st.integers(0, 120), max_size=2).map(tuple),
                              finite), max_size=5).map(tuple),
    services=st.lists(st.builds(ServiceStatus, names, st.integers(-5, 5)), max_size=5).map(tuple),
    resource=st.one_of(st.none(), st.integers(0, 2**40).flatmap(lambda total: st.builds(
        Resource, st.lists(st.floats(0, 1), max_size=8).map(tuple),
        st.just(total), st.integers(0, total)))),
    extras=st.dictionaries(st.sampled_from([("seq",), ("state", "mode"), ("state", "low", "tick")]),
                           st.one_of(st.integers(), names), max_size=2),
)


@settings(max_examples=100, deadline=None)
@given(snapshots)
def test_parse_synthesize_identity(snapshot):
    assert parse_report(synthesize_report(snapshot)) == snapshot


# endpoints and scheduling

def test_endpoint_config():
    cfg = EndpointConfig.from_dict(MQTT)
    assert cfg.report_interval == 300
    assert cfg.server_for("CN").destination == "robot-mqtt.unitree.com:17883"
    assert cfg.server_for("EU").host == "global-robot-mqtt.unitree.com"
    assert cfg.servers["CN"].scheme == "mqtts"


@pytest.mark.parametrize("kw", [
    {"report_interval": 0}, {"reconnect_interval": -1},
    {"server_uri_map": {"x": "robot-mqtt.unitree.com:17883"}},
    {"server_uri_map": {"x": "mqtts://robot-mqtt.unitree.com"}},
    {"server_uri_map": {"x": "mqtts://host:notaport"}},
])
def test_endpoint_validation(kw):
    args = {"server_uri_map": MQTT["ServerUriMap"], **kw}
    with pytest.raises(SchemaError):
        EndpointConfig(**args)


def test_schedule_window():
    sched = ReportScheduler(EndpointConfig.from_dict(MQTT))
    assert [e.t for e in sched.run(1000)] == [0, 300, 600, 900]
    assert list(sched.report_times(1000)) == [0, 300, 600, 900]


def test_reconnect_after_disconnect():
    cfg = EndpointConfig(MQTT["ServerUriMap"], report_interval=5, reconnect_interval=10)
    events = [(e.kind, e.t) for e in ReportScheduler(cfg).run(40, [(10, 15)])]
    assert ("disconnect", 10) in events
    assert events[events.index(("disconnect", 10)) + 1:][:3] == [
        ("missed", 10), ("missed", 15), ("reconnect_attempt", 20)]
    assert ("reconnected", 20) in events and ("report", 20) in events


def test_no_auto_reconnect():
    cfg = EndpointConfig(MQTT["ServerUriMap"], auto_reconnect=False, report_interval=5)
    kinds = [e.kind for e in ReportScheduler(cfg).run(30, [(7, 8)])]
    assert "reconnect_attempt" not in kinds and kinds[-1] == "missed"


@given(st.integers(-10**6, 10**6), st.integers(1, 10**6), st.integers(0, 10**12))
def test_slots_exact(t0, interval, k):
    sched = ReportScheduler(EndpointConfig(MQTT["ServerUriMap"], report_interval=interval), t0)
    assert sched.slot(k) == t0 + k * interval
    assert sched.slot(k + 1) - sched.slot(k) == interval


def test_fractional_interval_does_not_drift():
    sched = ReportScheduler(EndpointConfig(MQTT["ServerUriMap"], report_interval=Fraction(1, 3)))
    assert sched.slot(3 * 10**6) == 10**6


# captures

def test_paper_rates():
    report = analyze_capture(synthetic_capture({PRIMARY: 187_378, SECONDARY: 27_301}))
    assert report.duration == 600
    assert report.endpoint(PRIMARY).total_bytes == 187_378
    assert report.endpoint(PRIMARY).mean_rate_bps == pytest.approx(2498.37, abs=0.01)
    assert report.endpoint(SECONDARY).mean_rate_bps == pytest.approx(364.01, abs=0.01)
    assert report.endpoint(PRIMARY).inter_arrival_mean == pytest.approx(5.0)
    assert report.flagged == [PRIMARY, SECONDARY]


def test_explicit_duration():
    recs = [CaptureRecord(1.0, PRIMARY, 100), CaptureRecord(2.0, PRIMARY, 100)]
    assert analyze_capture(recs).mean_rate_bps == 1600
    assert analyze_capture(recs, duration=8).mean_rate_bps == 200
    assert analyze_capture(recs[:1]).mean_rate_bps is None


def test_allowlist():
    recs = synthetic_capture({PRIMARY: 10, SECONDARY: 10, "mqtt.example.org:8883": 5}, 10, 2)
    assert analyze_capture(recs, ["43.175.0.0/16", "mqtt.example.org"]).flagged == []
    assert analyze_capture(recs, ["43.175.228.18"]).flagged == [SECONDARY, "mqtt.example.org:8883"]
    assert not Allowlist(["::1/128"]).permits("127.0.0.1")
    assert Allowlist(["2001:db8::/32"]).permits("2001:db8::1")


def test_empty_capture():
    with pytest.raises(EmptyCapture):
        analyze_capture([])


def test_record_validation():
    with pytest.raises(SchemaError):
        CaptureRecord(0, "nohostport", 1)
    with pytest.raises(SchemaError):
        CaptureRecord(0, PRIMARY, 2, b"abc")
    assert CaptureRecord(0, "[2001:db8::1]:443", 1).host == "2001:db8::1"


def test_jsonl_round_trip():
    recs = [CaptureRecord(0.5, PRIMARY, 10, b"\x00\xffpayload"), CaptureRecord(1.25, SECONDARY, 3)]
    buf = io.StringIO()
    write_capture(recs, buf)
    assert read_capture(io.StringIO(buf.getvalue())) == recs
    with pytest.raises(SchemaError):
        read_capture(io.StringIO('{"ts": 1}\n'))


def test_block_rules():
    report = analyze_capture(synthetic_capture({PRIMARY: 187_378}))
    rules = emit_block_rules(report, ["43.175.0.0/16"])
    assert rules == ["ufw deny out to 43.175.0.0/16",
                     "ufw deny out to 43.175.228.18 port 17883 proto tcp"]
    assert emit_block_rules(None, []) == []
    assert emit_block_rules(report, ["43.175.0.0/16", "43.175.0.0/16"]) == rules


records = st.lists(st.builds(
    CaptureRecord,
    st.floats(0, 1e6, allow_nan=False),
    st.sampled_from([PRIMARY, SECONDARY, "10.0.0.5:443", "example.com:80", "[2001:db8::7]:53"]),
    st.integers(0, 10**7)), min_size=2, max_size=40)
allow_entries = st.lists(st.sampled_from(
    ["43.175.0.0/16", "43.175.228.18", "10.0.0.0/8", "example.com", "2001:db8::/32", "192.0.2.1"]),
    max_size=4)


@given(records, allow_entries, allow_entries)
def test_flagging_is_monotone(recs, base, more):
    small = set(analyze_capture(recs, base).flagged)
    large = set(analyze_capture(recs, base + more).flagged)
    assert large <= small


@given(records)
def test_rate_arithmetic(recs):
    report = analyze_capture(recs)
    if report.duration > 0:
        for e in report.endpoints:
            assert math.isclose(e.mean_rate_bps * report.duration / 8, e.total_bytes,
                                rel_tol=1e-9, abs_tol=1e-9)
    assert report.total_bytes == sum(r.byte_count for r in recs)


@given(records)
def test_rules_have_no_duplicates(recs):
    rules = emit_block_rules(analyze_capture(recs), ["43.175.0.0/16"])
    assert len(rules) == len(set(rules))
