"""Command line entry point: ``simulate``, ``sweep``, ``verify`` and ``threshold``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .config import ScenarioConfig, load_config
from .diagnostics import theta_M
from .errors import ConfigError, NumericalError

logger = logging.getLogger("sp1d")


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None):
        changes["out"] = args.out
    return cfg.replace(**changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    code = harness.run_scenario(cfg)
    summary = Path(cfg.out) / "summary.json"
    if code == 0 and summary.exists():
        data = json.loads(summary.read_text())
        print(f"primal: {data['outcome_primal']}  transformed: {data['outcome_transformed']}  "
              f"all checks passed: {data['all_checks_passed']}")
    return code


def cmd_sweep(args) -> int:
    cfg = _load(args)
    return harness.sweep(cfg, args.axis, args.values, jobs=args.jobs)


def cmd_verify(args) -> int:
    cfg = _load(args)
    reports = harness.verify_suites(n=args.count, seed=cfg.seed)
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        harness.write_json(out / "verify.json", reports)
    except OSError as exc:
        logger.error("cannot write verify report: %s", exc)
        return harness.EXIT_IO
    bad = 0
    for name, rep in reports.items():
        print(f"{name}: checked {rep['checked']}, violations {len(rep['violations'])}")
        bad += len(rep["violations"])
    return harness.EXIT_OK if bad == 0 else harness.EXIT_NUMERICAL


def cmd_threshold(args) -> int:
    cfg = _load(args)
    theta = theta_M(cfg.q, cfg.M, cfg.spec())
    print(harness.fmt(theta))
    return harness.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sp1d", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", metavar="PATH", help="key=value scenario file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        if out:
            p.add_argument("--out", metavar="DIR", help="output directory")

    p = sub.add_parser("simulate", help="run one scenario in both formulations")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run one scenario per value of an axis")
    common(p)
    p.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p.add_argument("--values", type=float, nargs="*", default=[])
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="randomized functional-inequality suites")
    common(p)
    p.add_argument("--count", type=int, default=1000, help="functions per suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("threshold", help="print the virial threshold for the configured spec")
    common(p, out=False)
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return harness.EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return harness.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
