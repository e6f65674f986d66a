"""
Command-line scenario runner.

    foliation-blowup run scenario.json [--out DIR] [--seed N] [--parallel]
    foliation-blowup run --builtin sl2
    foliation-blowup examples

Each probe writes ``<index>-<op>.json`` (and ``.csv`` when requested) into the
output directory. Exit status: 0 all probes passed, 2 a probe failed or its
expectations did not hold, 1 the input could not be used.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema

from . import reports
from .errors import FoliationBlowupError, InvalidInput
from .foliation import FoliationModule
from .group_action import LieAlgebraAction
from .probes import OPS, Context, ProbeResult, run_probe
from .scenarios import BUILTINS, builtin, sln_action

log = logging.getLogger("foliation_blowup")

EXIT_OK, EXIT_INPUT, EXIT_ASSERT = 0, 1, 2

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": ["lie_action", "poly_foliation", "builtin"]},
        "payload": {"type": "object"},
        "seed": {"type": "integer"},
        "output": {
            "type": "object",
            "properties": {"path": {"type": "string"}, "format": {"enum": ["json", "csv"]}},
            "additionalProperties": False,
        },
        "probes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["op"],
                "additionalProperties": False,
                "properties": {
                    "op": {"enum": sorted(OPS)},
                    "params": {"type": "object"},
                    "expect": {"type": "object"},
                },
            },
        },
    },
}

LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging() -> None:
    level = os.environ.get("FB_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def load_scenario(path: Path) -> dict:
    """Parse and validate a scenario file; errors carry line/column or JSON path."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validate(data, str(path))
    return data


def validate(data: dict, label: str = "scenario") -> None:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidInput(f"{label}: at {where}: {exc.message}") from exc


def builtin_scenario(name: str, seed: int = 0) -> dict:
    b = builtin(name)
    return {"name": name, "kind": "builtin", "payload": {"name": name}, "seed": seed, "probes": b.probes}


def build_context(data: dict, seed: int) -> Context:
    kind = data["kind"]
    payload = data.get("payload", {})
    name = data.get("name", kind)
    if kind == "lie_action":
        act = LieAlgebraAction.from_json(payload)
        return Context(name, act.foliation(), act, seed)
    if kind == "poly_foliation":
        return Context(name, FoliationModule.from_json(payload), None, seed)
    bname = payload.get("name")
    if bname == "sln" and "n" in payload:
        act = sln_action(int(payload["n"]))
        return Context(name, act.foliation(), act, seed)
    b = builtin(str(bname))
    return Context(name, b.foliation, b.action, seed)


def _execute(ctx: Context, probe: dict) -> tuple[ProbeResult | None, str | None]:
    try:
        return run_probe(ctx, probe), None
    except InvalidInput:
        raise
    except FoliationBlowupError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_scenario(data: dict, out: Path, seed: int | None = None, parallel: bool = False) -> int:
    """Execute all probes; return the exit code."""
    validate(data)
    seed = data.get("seed", 0) if seed is None else seed
    ctx = build_context(data, seed)
    probes = data.get("probes")
    if probes is None and data["kind"] == "builtin":
        probes = builtin(str(data.get("payload", {}).get("name"))).probes
    probes = probes or []
    fmt = data.get("output", {}).get("format", "json")
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    if parallel and len(probes) > 1:
        with ThreadPoolExecutor() as pool:
            outcomes = list(pool.map(lambda pr: _execute(ctx, pr), probes))
    else:
        outcomes = [_execute(ctx, pr) for pr in probes]

    summary, failed = [], False
    for i, (probe, (res, err)) in enumerate(zip(probes, outcomes)):
        report = {"index": i, "op": probe["op"], "params": probe.get("params", {}),
                  "expect": probe.get("expect", {})}
        if err is not None:
            report.update(passed=False, error=err, failures=[err])
        else:
            report.update(passed=not res.failures, failures=res.failures, result=res.result)
            if fmt == "csv" and res.csv is not None:
                reports.write_csv(out / f"{i}-{probe['op']}.csv", *res.csv)
        reports.write_json(out / f"{i}-{probe['op']}.json", report)
        failed |= not report["passed"]
        summary.append({"index": i, "op": probe["op"], "passed": report["passed"]})
        level = logging.INFO if report["passed"] else logging.WARNING
        log.log(level, "probe %d %s: %s", i, probe["op"], "ok" if report["passed"] else report["failures"])
    reports.write_json(out / "summary.json", {"scenario": ctx.name, "seed": seed, "probes": summary})
    log.info("%d probes in %.2f s", len(probes), time.perf_counter() - t0)
    return EXIT_ASSERT if failed else EXIT_OK


def list_examples() -> str:
    lines = []
    for name in BUILTINS:
        b = builtin(name)
        lines.append(f"{name:16s} {b.kind:15s} n={b.foliation.n} k={b.foliation.k}  {b.description}")
    return "\n".join(lines)


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="foliation-blowup", description="Blow-up computations for singular foliations")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or a built-in scenario")
    run.add_argument("scenario", nargs="?", type=Path, help="scenario JSON file")
    run.add_argument("--builtin", metavar="NAME", help="run a built-in scenario instead of a file")
    run.add_argument("--out", type=Path, default=None, help="report directory (default: reports/<name>)")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--parallel", action="store_true", help="run probes concurrently")
    sub.add_parser("examples", help="list built-in scenarios")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    configure_logging()
    if args.command == "examples":
        print(list_examples())
        return EXIT_OK
    try:
        if (args.scenario is None) == (args.builtin is None):
            raise InvalidInput("give exactly one of a scenario file or --builtin NAME")
        if args.builtin:
            data = builtin_scenario(args.builtin, 0)
        else:
            data = load_scenario(args.scenario)
        out = args.out or Path(data.get("output", {}).get("path", f"reports/{data.get('name', data['kind'])}"))
        return run_scenario(data, out, args.seed, args.parallel)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
