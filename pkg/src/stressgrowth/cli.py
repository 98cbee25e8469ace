"""Command-line entry point: ``run``, ``sweep`` and ``verify``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import load_config, parameter_names
from .errors import ConfigError
from .scenarios import EXIT_CONFIG, EXIT_OK, EXIT_STEP_FAILURE, run_scenario

log = logging.getLogger("stressgrowth")

SUMMARY_HEADER = ("param", "value", "status", "exit_code", "steps_completed", "uz_p1_final", "uz_p1_last_change")


def _load(path, out=None):
    cfg = load_config(path)
    if out is not None:
        cfg = cfg.with_output_dir(Path(out).resolve())
    return cfg


def cmd_run(args):
    try:
        cfg = _load(args.config, args.out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG

    def progress(res):
        if res.step % args.log_every == 0:
            log.info("step %d: %d iterations, %d sub-steps", res.step, res.iterations, res.substeps)

    res = run_scenario(cfg, progress=progress)
    if res.exit_code == EXIT_OK:
        log.info("completed %d steps -> %s", res.steps_completed, res.output_dir)
    else:
        log.error("%s (outputs up to step %d kept in %s)", res.message, res.steps_completed, res.output_dir)
    return res.exit_code


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --values {text!r}: {exc}") from exc


def _format_value(v):
    return "inf" if math.isinf(v) else repr(v)


def _sweep_one(cfg, param, value):
    cfg = cfg.with_param(param, value).with_output_dir(Path(cfg.output_dir) / f"{param}_{_format_value(value)}")
    res = run_scenario(cfg)
    return res


def _summary_row(param, value, res, history):
    change = history[-1] - history[-2] if len(history) > 1 else math.nan
    final = history[-1] if history else math.nan
    return (param, _format_value(value), res.status, res.exit_code, res.steps_completed, final, change)


def _uz_history(run_dir):
    path = Path(run_dir) / "series.csv"
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [float(row["uz_p1"]) for row in csv.DictReader(fh)]


def cmd_sweep(args):
    try:
        base = _load(args.config, args.out)
        values = _parse_values(args.values)
        if args.param not in parameter_names(base.material):
            raise ConfigError(f"unknown parameter {args.param!r} for material {base.material!r}; "
                              f"choose from {', '.join(parameter_names(base.material))}")
        if not values:
            raise ConfigError("--values is empty")
        for v in values:  # validate every value before the first run starts
            base.with_param(args.param, v)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    rows = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_sweep_one, base, args.param, v) for v in values]
            results = [f.result() for f in futures]
    else:
        results = [_sweep_one(base, args.param, v) for v in values]
    for value, res in zip(values, results):
        log.info("%s = %s: %s", args.param, _format_value(value), res.status)
        rows.append(_summary_row(args.param, value, res, _uz_history(res.output_dir)))
    out = Path(base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)
    return EXIT_OK if all(r.exit_code == EXIT_OK for r in results) else EXIT_STEP_FAILURE


def cmd_verify(args):
    from .verify import run_verification

    report = run_verification("full" if args.full else "quick", seed=args.seed,
                              tangent_perturbation=args.perturb_tangent)
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    for prop in report["properties"]:
        log.info("%-40s %s", prop["name"], "pass" if prop["passed"] else "FAIL")
    return 0 if report["passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="stressgrowth", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--config", required=True, help="JSON scenario configuration")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--log-every", type=int, default=50, help="progress message period in steps")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a scenario for several values of one material parameter")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated list")
    sweep.add_argument("--out", help="root directory of the sweep")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel runs")
    sweep.set_defaults(func=cmd_sweep)

    verify = sub.add_parser("verify", help="run the property self-checks")
    verify.add_argument("--full", action="store_true", help="1000 random draws per property instead of 100")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--report", help="write the JSON report to this file as well")
    verify.add_argument("--perturb-tangent", type=float, default=0.0, help=argparse.SUPPRESS)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
