"""Command-line entry point: ``signvote {run,verify,bounds,bitcost,serve,work}``.

Exit status is 0 only when no round was aborted and every verification
check passed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds
from .harness import emit_csv, emit_json, load_config, run_experiment, verify_bounds
from .harness.config import ConfigError
from .harness.experiment import ExperimentError, build_worker
from .harness.verify import SUITES
from .qsgd import SCHEMES, bit_cost
from .transport.tcp import DEFAULT_TIMEOUT, run_server, run_worker

log = logging.getLogger("signvote")

BOUND_TABLES = ("lemma1", "star", "epsilon")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def _config(args):
    overrides = list(args.set or ())
    if getattr(args, "seed", None) is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if getattr(args, "transport", None) is not None:
        overrides.append(f"experiment.transport={args.transport}")
    return load_config(args.config, overrides)


def cmd_run(args) -> int:
    cfg = _config(args)
    try:
        result = run_experiment(cfg, timeout=args.timeout)
    except ExperimentError as exc:
        log.error("%s", exc)
        return 1
    if args.out:
        out = Path(args.out)
        if out.suffix == ".json":
            emit_json(result.records, out, result.summary)
        else:
            emit_csv(result.records, out)
    json.dump(result.summary, sys.stdout, indent=1)
    print()
    return 0


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    reports = [verify_bounds(s) for s in suites]
    doc = {"passed": all(r.passed for r in reports), "suites": [r.as_dict() for r in reports]}
    text = json.dumps(doc, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    for r in reports:
        log.info("%s: %s", r.suite, "PASS" if r.passed else "FAIL")
    return 0 if doc["passed"] else 1


def cmd_bounds(args) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    snrs = _floats(args.snr)
    if args.table == "lemma1":
        writer.writerow(["S", "bound", "vacuous"])
        for S in snrs:
            b = bounds.lemma1_bound(S)
            writer.writerow([repr(S), repr(float(b)), int(b.vacuous)])
    elif args.table == "epsilon":
        writer.writerow(["S", "epsilon_lower", "step_holds"])
        for S in snrs:
            writer.writerow([repr(S), repr(bounds.epsilon_lower_bound(S)), int(bounds.epsilon_step_holds(S))])
    else:
        writer.writerow(["M", "alpha", "S", "bound", "vacuous"])
        for M in _ints(args.workers):
            for alpha in _floats(args.alpha):
                for S in snrs:
                    b = bounds.vote_failure_bound(M, alpha, S)
                    writer.writerow([M, repr(alpha), repr(S), repr(float(b)), int(b.vacuous)])
    return 0


def cmd_bitcost(args) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["M", "d", *SCHEMES, "cheapest"])
    for M in _ints(args.workers):
        for d in _ints(args.dim):
            reports = {s: bit_cost(s, M, d) for s in SCHEMES}
            usable = {s: r.bits_per_iteration for s, r in reports.items() if not r.degenerate}
            writer.writerow([M, d, *(reports[s].bits_per_iteration for s in SCHEMES), min(usable, key=usable.get)])
    return 0


def cmd_serve(args) -> int:
    cfg = load_config(args.config, args.set)
    report = run_server(args.bind, cfg.workers, cfg.rounds, cfg.dim, args.timeout)
    if report.exit_status:
        log.error("aborted after %d rounds: %s", report.rounds_completed, report.abort_reason)
    else:
        log.info("completed %d rounds, %d sign bits", report.rounds_completed, report.stats.sign_bits)
    return report.exit_status


def cmd_work(args) -> int:
    cfg = load_config(args.config, args.set)
    worker = build_worker(cfg, args.worker_id)
    report = run_worker(args.connect, worker, cfg.rounds, args.timeout)
    if args.out:
        np.save(args.out, report.x)
    if report.exit_status:
        log.error("worker %d: %s", args.worker_id, report.reason)
    return report.exit_status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signvote", description="Sign-vote distributed optimizer experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, required=False):
        sp.add_argument("--config", "-c", required=required, help="INI experiment config")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
        sp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="per-round timeout in seconds")

    r = sub.add_parser("run", help="run an experiment and write per-round telemetry")
    with_config(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--transport", choices=("sim", "tcp"))
    r.add_argument("--out", "-o", help="telemetry path (.csv or .json)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run bound-verification suites")
    v.add_argument("suite", choices=(*SUITES, "all"))
    v.add_argument("--out", "-o", help="write the JSON report here instead of stdout")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="tabulate a closed-form bound as CSV")
    b.add_argument("table", choices=BOUND_TABLES)
    b.add_argument("--snr", default="0.1,0.5,1,2,5")
    b.add_argument("--workers", default="1,3,9,27")
    b.add_argument("--alpha", default="0,0.1111111111111111,0.3333333333333333")
    b.set_defaults(func=cmd_bounds)

    c = sub.add_parser("bitcost", help="bits per iteration for each compression scheme")
    c.add_argument("--workers", default="1,3,9,27,81")
    c.add_argument("--dim", default="1000,100000,10000000")
    c.set_defaults(func=cmd_bitcost)

    s = sub.add_parser("serve", help="parameter server over TCP")
    with_config(s, required=True)
    s.add_argument("--bind", default="127.0.0.1:5555")
    s.set_defaults(func=cmd_serve)

    w = sub.add_parser("work", help="one TCP worker")
    with_config(w, required=True)
    w.add_argument("--connect", default="127.0.0.1:5555")
    w.add_argument("--worker-id", type=int, required=True)
    w.add_argument("--out", "-o", help="save the final parameter vector (.npy)")
    w.set_defaults(func=cmd_work)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
