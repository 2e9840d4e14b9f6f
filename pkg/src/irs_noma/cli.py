"""Command line entry point: ``irs-noma run|presets|check``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import harness
from .checks import run_checks


def _parse_L(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--L expects comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs-noma", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV + JSON sidecar")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("spec", nargs="?", help="YAML spec file")
    src.add_argument("--preset", choices=harness.PRESET_NAMES)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--L", type=_parse_L, help="comma-separated reflector counts, e.g. 8,16")
    run.add_argument("--out", help="CSV path (default: from the spec, else stdout)")
    run.add_argument("--problem", choices=harness.PROBLEMS)
    run.add_argument("--access", choices=harness.ACCESS)
    run.add_argument("--beamformer", choices=harness.BEAMFORMERS)
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--timing", action="store_true",
                     help="record wall-clock time (output is then not reproducible)")

    sub.add_parser("presets", help="list preset names")

    check = sub.add_parser("check", help="run the quick invariant/oracle suite")
    check.add_argument("--seed", type=int, default=0)
    return parser


def _apply_overrides(spec: harness.ExperimentSpec, args) -> harness.ExperimentSpec:
    changes = {}
    if args.seed is not None:
        changes["cfg"] = spec.cfg.with_(seed=args.seed)
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.L is not None:
        changes["L_sweep"] = args.L
    if args.out is not None:
        changes["output"] = args.out
    if args.timing:
        changes["timing"] = True
    if args.problem or args.access or args.beamformer:
        first = spec.methods[0]
        changes["methods"] = (harness.Method(args.problem or first.problem,
                                             args.access or first.access,
                                             args.beamformer or first.beamformer),)
    return replace(spec, **changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "presets":
        for name in harness.PRESET_NAMES:
            spec = harness.preset(name)
            print(f"{name}\tK={spec.cfg.K}\tR_min={spec.cfg.R_min[0]}\t"
                  + ",".join(m.label for m in spec.methods))
        return 0

    if args.command == "check":
        results = run_checks(args.seed)
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.detail})")
        return 0 if all(r.passed for r in results) else 1

    try:
        spec = harness.preset(args.preset) if args.preset else harness.load_spec(args.spec)
        spec = _apply_overrides(spec, args)
    except (OSError, KeyError, ValueError) as exc:
        print(f"irs-noma: {exc}", file=sys.stderr)
        return 2
    rows = harness.run_experiment(spec, jobs=args.jobs)
    if spec.output:
        sidecar = harness.write_results(spec, rows, spec.output)
        print(f"wrote {spec.output} and {sidecar}", file=sys.stderr)
    else:
        sys.stdout.write(harness.rows_to_csv(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
