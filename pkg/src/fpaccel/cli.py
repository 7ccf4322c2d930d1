"""``fpaccel`` command line: ``run``, ``table`` and ``verify``.

Exit codes: 0 success, 1 some trial did not converge (or a check failed),
2 configuration error.
"""

import argparse
import os
import sys

from .errors import ConfigError
from .harness import (
    aggregate,
    emit_report,
    format_table,
    load_config,
    parse_sweep,
    rate_table,
    run_experiment,
    verify_suite,
)

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_CONFIG = 2


def _build_parser():
    p = argparse.ArgumentParser(prog="fpaccel", description="Fixed-point acceleration experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configuration over its seeds")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (default: config output.dir)")
    run.add_argument("--format", choices=("csv", "json"), help="default: config output.format")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")

    table = sub.add_parser("table", help="rate/iteration table over a parameter sweep")
    table.add_argument("--config", required=True)
    table.add_argument("--sweep", action="append", default=[], help="m=0,1,2 or method=a,b; repeatable")
    table.add_argument("--threads", type=int, default=1)

    sub.add_parser("verify", help="planted-solution and oracle checks")
    return p


def _cmd_run(args):
    config = load_config(args.config)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    out_dir = args.out or config.out_dir
    fmt = args.format or config.out_format
    reports = run_experiment(config, args.threads)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{config.name}.{fmt}")
    emit_report(reports, fmt, path, include_timing=not args.no_timing)

    agg = aggregate(reports, config.label())
    print(f"{agg.label}: {agg.converged}/{agg.trials} converged, "
          f"mean iterations {agg.mean_iterations:.1f}, mean rate {agg.mean_rate:.4f}")
    for r in reports:
        if not r.converged:
            print(f"  seed {r.seed}: {r.status} {r.message}".rstrip())
    print(f"wrote {path}")
    return EXIT_OK if agg.excluded == 0 else EXIT_NONCONVERGED


def _cmd_table(args):
    config = load_config(args.config)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    sweeps = [parse_sweep(s) for s in args.sweep]
    rows = rate_table(config, sweeps, args.threads)
    print(format_table(rows))
    return EXIT_OK if all(a.excluded == 0 for _, a in rows) else EXIT_NONCONVERGED


def _cmd_verify(args):
    results = verify_suite()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NONCONVERGED


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches EXIT_CONFIG
        return exc.code
    handler = {"run": _cmd_run, "table": _cmd_table, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for msg in exc.problems:
            print(f"  - {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
