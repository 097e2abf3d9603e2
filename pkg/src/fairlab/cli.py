"""Scenario runner and inspection tool.

    fairlab gen segments --depth 2 --seed 7 --out s.json
    fairlab run s.json --mode neverending --out trace.jsonl
    fairlab audit trace.jsonl
    fairlab verify chain.jsonl

Exit codes: 0 when the run completed and every gating audit holds, 1 on a
fairness violation in a gating check, 2 on usage or IO errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional

from .audit import audit_trace
from .core import validate_config
from .simnet.generators import (
    benign_schedule,
    cycle_schedule,
    fuzz_scenario,
    probabilistic_adversary,
    segment_schedule,
)
from .simnet.runner import Simulation
from .simnet.scenario import Scenario, load_scenario, save_scenario
from .simnet.trace import Trace
from .validity import certificate_from_dict, verify_certificate

USAGE_ERROR = 2
GATE_ERROR = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairlab")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="emit a scenario file from a generator")
    gen.add_argument("generator", choices=["cycle", "segments", "benign", "probabilistic", "fuzz"])
    gen.add_argument("--parties", type=int, default=4)
    gen.add_argument("--faults", type=int, default=1)
    gen.add_argument("--depth", type=int, default=2)
    gen.add_argument("--requests", type=int, default=4)
    gen.add_argument("--markets", type=int, default=1)
    gen.add_argument("--p", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--base", help="scenario file to wrap (probabilistic)")
    gen.add_argument("--mode", choices=["neverending", "clocked", "hybrid"])
    gen.add_argument("--rmax", type=int)
    gen.add_argument("--out", help="output path (default stdout)")

    run = sub.add_parser("run", help="execute a scenario, audit it, write the trace")
    run.add_argument("scenario")
    run.add_argument("--mode", choices=["neverending", "clocked", "hybrid"])
    run.add_argument("--rmax", type=int)
    run.add_argument("--seed", type=int, help="override the wrapper/coin seed")
    run.add_argument("--parties", type=int)
    run.add_argument("--faults", type=int)
    run.add_argument("--out", help="trace output path")
    run.add_argument("--chain", help="chain (certificate) output path")
    run.add_argument("--format", choices=["text", "structured"], default="text")

    audit = sub.add_parser("audit", help="re-audit an existing trace file")
    audit.add_argument("trace")
    audit.add_argument("--format", choices=["text", "structured"], default="text")

    verify = sub.add_parser("verify", help="re-verify every certificate in a chain file")
    verify.add_argument("chain")
    verify.add_argument("--format", choices=["text", "structured"], default="text")
    return parser


def _generate(args: argparse.Namespace) -> Scenario:
    cfg = validate_config(args.parties, args.faults)
    if args.generator == "cycle":
        scenario = cycle_schedule(cfg)
    elif args.generator == "segments":
        scenario = segment_schedule(cfg, depth=args.depth, seed=args.seed)
    elif args.generator == "benign":
        scenario = benign_schedule(cfg, requests=args.requests, seed=args.seed,
                                   markets=args.markets)
    elif args.generator == "fuzz":
        scenario = fuzz_scenario(args.seed, n=args.parties, t=args.faults)
    else:
        if args.base:
            base = load_scenario(args.base)
        else:
            base = segment_schedule(cfg, depth=args.depth, seed=args.seed)
        scenario = probabilistic_adversary(base, args.p, args.seed)
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.rmax is not None:
        overrides["r_max"] = args.rmax
    if overrides:
        scenario = dataclasses.replace(scenario, **overrides)
    return scenario


def _apply_run_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.rmax is not None:
        overrides["r_max"] = args.rmax
    if args.seed is not None:
        overrides["wrapper_seed"] = args.seed
        overrides["coin_seed"] = str(args.seed)
    if args.parties is not None:
        overrides["n"] = args.parties
    if args.faults is not None:
        overrides["t"] = args.faults
    return dataclasses.replace(scenario, **overrides) if overrides else scenario


def _run(args: argparse.Namespace) -> int:
    scenario = _apply_run_overrides(load_scenario(args.scenario), args)
    sim = Simulation(scenario)
    for event in scenario.events:
        sim.execute(event)
    sim.drain()
    trace = sim.finish()
    report = audit_trace(trace)
    if args.out:
        trace.save(args.out)
    if args.chain:
        with open(args.chain, "w") as fh:
            header = json.dumps(
                {"kind": "chain-header", "n": scenario.n, "t": scenario.t},
                sort_keys=True,
            )
            fh.write("\n".join([header] + sim.chain_lines()) + "\n")
    summary = trace.summary
    if args.format == "structured":
        print(json.dumps({"summary": summary, "report": report.to_dict()}, sort_keys=True))
    else:
        print(f"run {scenario.label or args.scenario}: "
              f"{summary['blocks']} blocks, {summary['delivered']} delivered, "
              f"{summary['pending']} pending, max candidate order "
              f"{summary['max_candidate_order']}, steps {summary['elapsed_steps']}")
        print(report.render_text())
    return 0 if report.gate_ok() else GATE_ERROR


def _audit(args: argparse.Namespace) -> int:
    trace = Trace.load(args.trace)
    report = audit_trace(trace)
    if args.format == "structured":
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        print(report.render_text())
    return 0 if report.gate_ok() else GATE_ERROR


def _verify(args: argparse.Namespace) -> int:
    with open(args.chain) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "chain-header":
        raise ValueError("chain file does not start with a chain-header line")
    cfg = validate_config(lines[0]["n"], lines[0]["t"])
    results = []
    all_ok = True
    for entry in lines[1:]:
        cert = certificate_from_dict(entry["certificate"])
        verdict = verify_certificate(cfg, cert)
        results.append({"number": entry["number"], "status": verdict.status,
                        "reason": verdict.reason})
        all_ok = all_ok and verdict.ok
    if args.format == "structured":
        print(json.dumps({"blocks": results, "ok": all_ok}, sort_keys=True))
    else:
        for row in results:
            suffix = "" if row["reason"] is None else f" ({row['reason']})"
            print(f"block {row['number']}: {row['status']}{suffix}")
        print(f"chain: {'ok' if all_ok else 'INVALID'}")
    return 0 if all_ok else GATE_ERROR


def run_command(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        if args.command == "gen":
            scenario = _generate(args)
            if args.out:
                save_scenario(scenario, args.out)
            else:
                print(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))
            return 0
        if args.command == "run":
            return _run(args)
        if args.command == "audit":
            return _audit(args)
        return _verify(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
