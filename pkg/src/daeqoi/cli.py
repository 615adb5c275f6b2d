"""Command-line entry point.

Subcommands:

* ``run CONFIG``        -- execute a sweep described by a TOML config
* ``list-problems``     -- names of the built-in problems
* ``describe PROBLEM``  -- short description of one problem

Exit codes: 0 on full success, 1 on configuration/setup errors, 2 when some
cells of a sweep failed but others ran.
"""

import argparse
import sys

from .exceptions import DaeqoiError
from .experiment import ExperimentConfig, emit_report, run_experiment
from .problems import build_problem, describe, problem_names


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="daeqoi",
        description="Solve index-1/index-2 DAEs with implicit Euler and "
                    "estimate QoI errors with adjoint weights.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep from a config file")
    run.add_argument("config", help="path to a TOML experiment config")
    run.add_argument("--output", help="output file (overrides the config)")
    run.add_argument("--format", choices=("csv", "markdown"),
                     help="output format (overrides the config)")
    run.add_argument("--jobs", type=int, default=1,
                     help="number of sweep cells to run concurrently")

    sub.add_parser("list-problems", help="list built-in problem names")

    desc = sub.add_parser("describe", help="describe one built-in problem")
    desc.add_argument("problem")
    return parser


def _cmd_run(args):
    config = ExperimentConfig.from_toml(args.config)
    table = run_experiment(config, jobs=max(1, args.jobs))
    fmt = args.format or config.output_format
    path = args.output or config.output_path
    if path:
        emit_report(table, fmt, path)
        print(f"wrote {len(table.rows) - len(table.failed_rows)} rows to {path}")
    else:
        out = table.to_csv() if fmt == "csv" else table.to_markdown()
        sys.stdout.write(out)
    for row in table.failed_rows:
        print(f"FAILED cell dt={row.dt} T={row.T} method={row.method}: {row.error}",
              file=sys.stderr)
    return 2 if table.failed_rows else 0


def _cmd_list(_args):
    for name in problem_names():
        print(name)
    return 0


def _cmd_describe(args):
    problem = build_problem(args.problem)
    print(f"{args.problem}: n={problem.n} differential, m={problem.m} algebraic, "
          f"index-{problem.index}")
    text = describe(args.problem)
    if text:
        print(text)
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list-problems":
            return _cmd_list(args)
        return _cmd_describe(args)
    except DaeqoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
