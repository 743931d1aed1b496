"""Command-line entry point: `fmxkit <group> <command> ...`.

Exit codes: 0 success, 1 invalid input or runtime failure, 2 usage error.
`fmx crack` also uses 2 for an exhausted search.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .cipher import PaddingMode
from .container import HEADER_SIZE, HeaderProfile, detect, parse_header
from .errors import FmxKitError
from .keysearch import LENIENT, AttackPlan, PlaintextDetector, default_plan, run_attack
from .lcg import FIXTURE_IDENTITY, DeviceIdentity, ExplicitSeed, ReferenceMd5, TransformProfile
from .pipeline import PipelineConfig, layer2_only_decrypt, load, wrap

log = logging.getLogger("fmxkit")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
EXIT_EXHAUSTED = 2

PAPER_CAPTURE = {"43.175.228.18:17883": 187_378, "43.175.229.18:17883": 27_301}


# --- shared flag groups ------------------------------------------------------

def _hex_key(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex string: {text!r}") from None


def _add_key_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--key", type=_hex_key, help="Blowfish key as hex")
    g.add_argument("--key-file", type=Path, help="file holding the raw key bytes or a hex line")


def _read_key(args: argparse.Namespace) -> bytes:
    if args.key is not None:
        return args.key
    raw = args.key_file.read_bytes()
    try:
        return bytes.fromhex(raw.decode("ascii").strip())
    except (UnicodeDecodeError, ValueError):
        return raw


def _add_identity_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("device identity")
    g.add_argument("--device-code", default=FIXTURE_IDENTITY.device_code)
    g.add_argument("--rf-code", default=FIXTURE_IDENTITY.rf_code)
    g.add_argument("--bluetooth", default=FIXTURE_IDENTITY.bluetooth)
    g.add_argument("--machine-type", default=FIXTURE_IDENTITY.machine_type)
    g.add_argument("--firmware", type=int, default=FIXTURE_IDENTITY.firmware_version)


def _identity(args: argparse.Namespace) -> DeviceIdentity:
    return DeviceIdentity(args.device_code, args.rf_code, args.bluetooth,
                          args.machine_type, args.firmware)


_PROFILES = {"main": HeaderProfile.MAIN_TEXT, "appendix": HeaderProfile.APPENDIX_CHECKSUM}
_PADDINGS = {"zero": PaddingMode.ZERO, "pkcs7": PaddingMode.PKCS7}
_TRANSFORMS = {"zero": TransformProfile.IDENTITY_ZERO, "index": TransformProfile.INDEX_BYTE}


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    _add_key_flags(p)
    _add_identity_flags(p)
    p.add_argument("--profile", choices=_PROFILES, default="main", help="header layout")
    p.add_argument("--padding", choices=_PADDINGS, default="zero")
    p.add_argument("--transform", choices=_TRANSFORMS, default="zero", help="layer-1 f(i) profile")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="explicit layer-1 seed (default: derived)")
    p.add_argument("--checksum", action="store_true", help="store and verify MD5 (appendix profile)")


def _pipeline(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        key=_read_key(args),
        seed_profile=ReferenceMd5() if args.seed is None else ExplicitSeed(args.seed),
        transform=_TRANSFORMS[args.transform],
        header_profile=_PROFILES[args.profile],
        padding=_PADDINGS[args.padding],
        checksum_enabled=args.checksum,
    )


def _emit_json(doc) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


# --- fmx ---------------------------------------------------------------------

def cmd_fmx_inspect(args: argparse.Namespace) -> int:
    data = args.file.read_bytes()
    header = parse_header(data, _PROFILES[args.profile])
    payload_len = len(data) - HEADER_SIZE
    doc = {
        "magic": header.magic.hex(),
        "version": header.version,
        "size_field": header.size_field,
        "tail": header.tail.hex(),
        "payload_len": payload_len,
        "payload_block_aligned": payload_len % 8 == 0,
    }
    if header.profile is HeaderProfile.APPENDIX_CHECKSUM:
        doc.update(flags=header.flags, original_size=header.original_size,
                   checksum=header.checksum.hex())
    else:
        doc["size_consistent"] = header.payload_consistent(payload_len)
    _emit_json(doc)
    return EXIT_OK


def cmd_fmx_wrap(args: argparse.Namespace) -> int:
    args.output.write_bytes(wrap(args.input.read_bytes(), _identity(args), _pipeline(args)))
    return EXIT_OK


def cmd_fmx_unwrap(args: argparse.Namespace) -> int:
    args.output.write_bytes(load(args.input.read_bytes(), _identity(args), _pipeline(args)))
    return EXIT_OK


def cmd_fmx_dec2(args: argparse.Namespace) -> int:
    key = _read_key(args)
    if len(key) != 16:
        print(f"error: dec2 needs a 128-bit key (32 hex digits), got {len(key)} bytes",
              file=sys.stderr)
        return EXIT_USAGE
    args.out_dir.mkdir(parents=True, exist_ok=True)
    processed = 0
    for path in args.inputs:
        try:
            data = path.read_bytes()
            if not detect(data):
                print(f"[skip] {path} (no FMX magic)", file=sys.stderr)
                continue
            out = args.out_dir / f"{path.name}.dec2"
            out.write_bytes(layer2_only_decrypt(data, key))
        except (OSError, FmxKitError) as exc:
            print(f"[error] {path}: {exc}", file=sys.stderr)
            continue
        processed += 1
        print(f"[ok] {path} -> {out}", file=sys.stderr)
    if not processed:
        print("error: no FMX inputs processed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_fmx_crack(args: argparse.Namespace) -> int:
    try:
        data = args.file.read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if not detect(data):
        print(f"error: {args.file} has no FMX magic", file=sys.stderr)
        return EXIT_FAIL
    plan = default_plan(args.workers, args.pattern_budget, args.extended_budget,
                        args.exhaustive_budget)
    phases = tuple(p for p in plan.phases if p.name in args.phases)
    if not phases:
        print("error: no phases selected", file=sys.stderr)
        return EXIT_USAGE
    detector = LENIENT if args.lenient else PlaintextDetector()
    report = run_attack(data, _identity(args), AttackPlan(phases), detector)
    _emit_json(report.to_dict())
    return EXIT_OK if report.found else EXIT_EXHAUSTED


# --- orchestrate -------------------------------------------------------------

def _load_master(args: argparse.Namespace):
    from .orchestrator import load_config
    crypto = _pipeline(args) if (args.key is not None or args.key_file is not None) else None
    return load_config(args.config.read_bytes(), crypto, _identity(args))


def _executor(path: Optional[Path]):
    from .orchestrator import ScriptedExecutor
    if path is None:
        return ScriptedExecutor()
    return ScriptedExecutor.from_dict(json.loads(path.read_text()))


def _orchestrate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, required=True, help="master service JSON (plain or FMX)")
    p.add_argument("--scenario", type=Path, help="scripted child behaviour JSON")
    p.add_argument("--sequenced-only", action="store_true",
                   help="start only what startup_sequence lists")
    # Only needed for FMX-wrapped configs.
    g = p.add_mutually_exclusive_group()
    g.add_argument("--key", type=_hex_key)
    g.add_argument("--key-file", type=Path)
    _add_identity_flags(p)
    p.add_argument("--profile", choices=_PROFILES, default="main")
    p.add_argument("--padding", choices=_PADDINGS, default="zero")
    p.add_argument("--transform", choices=_TRANSFORMS, default="zero")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.add_argument("--checksum", action="store_true")


def _build_orchestrator(args: argparse.Namespace, sink):
    from .orchestrator import EventLog, Orchestrator, plan_startup
    cfg = _load_master(args)
    orch = Orchestrator(cfg, _executor(args.scenario), event_log=EventLog(sink),
                        reload_source=lambda: _load_master(args))
    plan = plan_startup(cfg, include_unsequenced=not args.sequenced_only)
    return orch, plan


def cmd_orchestrate_run(args: argparse.Namespace) -> int:
    sink = sys.stdout if str(args.event_log) == "-" else open(args.event_log, "w")
    try:
        try:
            orch, plan = _build_orchestrator(args, sink)
        except (OSError, json.JSONDecodeError, FmxKitError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
        report = orch.start(plan)
        orch.advance(int(args.duration * 1000))
        for item in report.failures:
            log.warning("startup failure: %s %s (%s)", item.kind.value, item.name, item.detail)
        states = {n: orch.runtime[n].state.name for n in orch.runtime}
        log.info("t=%d ms final states: %s", orch.now, json.dumps(states))
    finally:
        if sink is not sys.stdout:
            sink.close()
    return EXIT_OK


def cmd_orchestrate_rpc(args: argparse.Namespace) -> int:
    from .orchestrator.rpc import RpcServer
    try:
        orch, plan = _build_orchestrator(args, sys.stderr if args.verbose else None)
    except (OSError, json.JSONDecodeError, FmxKitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    orch.start(plan)
    server = RpcServer(orch, str(args.socket))

    async def main() -> None:
        await server.start()
        print(f"listening on {args.socket}", file=sys.stderr)
        last = time.monotonic()
        # Keep the simulated clock in step with wall time (scaled).
        while True:
            await asyncio.sleep(0.1)
            now = time.monotonic()
            async with server._lock:
                orch.advance(int((now - last) * 1000 * args.speed))
            last = now

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    finally:
        Path(args.socket).unlink(missing_ok=True)
    return EXIT_OK


# --- telemetry ---------------------------------------------------------------

def cmd_telemetry_analyze(args: argparse.Namespace) -> int:
    from .telemetry import analyze_capture, emit_block_rules, read_capture
    try:
        with open(args.capture) as fh:
            records = read_capture(fh)
        report = analyze_capture(records, args.allow, args.duration)
    except (OSError, FmxKitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit_json(report.to_dict(args.policy))
    if args.rules_out is not None:
        rules = emit_block_rules(report, args.policy)
        args.rules_out.write_text("".join(r + "\n" for r in rules))
    return EXIT_OK


def _dest_total(text: str) -> tuple[str, int]:
    dest, sep, total = text.rpartition("=")
    if not sep or not total.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port=bytes, got {text!r}")
    return dest, int(total)


def cmd_telemetry_synth(args: argparse.Namespace) -> int:
    from .telemetry import synthetic_capture, write_capture
    totals = dict(args.dest) if args.dest else dict(PAPER_CAPTURE)
    records = synthetic_capture(totals, args.duration, args.packets)
    if str(args.output) == "-":
        write_capture(records, sys.stdout)
    else:
        with open(args.output, "w") as fh:
            write_capture(records, fh)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmxkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    groups = parser.add_subparsers(dest="group", required=True)

    fmx = groups.add_parser("fmx", help="FMX containers and key search").add_subparsers(
        dest="command", required=True)

    p = fmx.add_parser("inspect", help="print the parsed header as JSON")
    p.add_argument("file", type=Path)
    p.add_argument("--profile", choices=_PROFILES, default="main")
    p.set_defaults(func=cmd_fmx_inspect)

    for name, func, helptext in (("wrap", cmd_fmx_wrap, "encrypt a plaintext file into FMX"),
                                 ("unwrap", cmd_fmx_unwrap, "decrypt an FMX file (both layers)")):
        p = fmx.add_parser(name, help=helptext)
        p.add_argument("input", type=Path)
        p.add_argument("output", type=Path)
        _add_pipeline_flags(p)
        p.set_defaults(func=func)

    p = fmx.add_parser("dec2", help="layer-2-only decrypt, writing <name>.dec2 files")
    p.add_argument("inputs", type=Path, nargs="+")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    _add_key_flags(p)
    p.set_defaults(func=cmd_fmx_dec2)

    p = fmx.add_parser("crack", help="known-plaintext key search")
    p.add_argument("file", type=Path)
    _add_identity_flags(p)
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--phases", nargs="+", default=["pattern", "extended", "exhaustive"],
                   choices=["pattern", "extended", "exhaustive"])
    p.add_argument("--pattern-budget", type=int, default=10_000)
    p.add_argument("--extended-budget", type=int, default=10_000_000)
    p.add_argument("--exhaustive-budget", type=int, default=10_000_000)
    p.add_argument("--lenient", action="store_true",
                   help="skip the printable-ratio check when confirming a key")
    p.set_defaults(func=cmd_fmx_crack)

    orch = groups.add_parser("orchestrate", help="master-service simulator").add_subparsers(
        dest="command", required=True)
    p = orch.add_parser("run", help="simulate startup and monitoring for a fixed time")
    _orchestrate_flags(p)
    p.add_argument("--duration", type=float, default=60.0, help="simulated seconds after startup")
    p.add_argument("--event-log", default="-", help="JSON-lines event log path ('-' = stdout)")
    p.set_defaults(func=cmd_orchestrate_run)

    p = orch.add_parser("rpc", help="serve the RPC surface on a Unix socket")
    _orchestrate_flags(p)
    p.add_argument("--socket", type=Path, required=True)
    p.add_argument("--speed", type=float, default=1.0, help="simulated ms per wall-clock ms")
    p.set_defaults(func=cmd_orchestrate_rpc)

    tel = groups.add_parser("telemetry", help="telemetry capture tools").add_subparsers(
        dest="command", required=True)
    p = tel.add_parser("analyze", help="per-endpoint byte and rate report")
    p.add_argument("capture", type=Path, help="JSON-lines capture file")
    p.add_argument("--allow", action="append", default=[], help="allowed host or CIDR (repeatable)")
    p.add_argument("--policy", action="append", default=[], help="CIDR to deny outright (repeatable)")
    p.add_argument("--duration", type=float, help="override the capture span in seconds")
    p.add_argument("--rules-out", type=Path, help="write block rules to this file")
    p.set_defaults(func=cmd_telemetry_analyze)

    p = tel.add_parser("synth", help="write a synthetic capture")
    p.add_argument("output", help="output path ('-' = stdout)")
    p.add_argument("--dest", type=_dest_total, action="append",
                   help="host:port=total_bytes (repeatable; default: the reference capture)")
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--packets", type=int, default=121, help="records per destination")
    p.set_defaults(func=cmd_telemetry_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ValueError, FmxKitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
