"""Command line entry point: run a config, list scenarios, or verify the acceptance suite.

Exit codes: 0 pass, 1 fail, 2 hypothesis not met, 3 configuration or usage error.
"""

from __future__ import annotations

import argparse
import sys

from epilab.experiment import EXIT_CONFIG, exit_code, load_config, output_dir, run_experiment, write_artifacts
from epilab.stochastic.estimators import ConfigError


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with hypothesis-not-met
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epilab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: [output] dir, then $EPILAB_OUTPUT_DIR)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--no-plot", action="store_true", help="skip series.png")

    sub.add_parser("list", help="list the scenario library")

    v = sub.add_parser("verify-all", help="run the acceptance suite")
    v.add_argument("--seed", type=int, default=None, help="override the packaged seeds")
    v.add_argument("--out", help="directory for per-criterion reports")
    return p


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        report = run_experiment(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = output_dir(cfg, args.out)
    files = write_artifacts(report, out, plot=not args.no_plot)
    sys.stdout.write(report.summary())
    print("wrote " + ", ".join(str(f) for f in files))
    return exit_code(report)


def cmd_list(args) -> int:
    from epilab.stochastic.scenarios import scenario_library

    for sc in scenario_library():
        print(sc.listing())
    return 0


def cmd_verify(args) -> int:
    from epilab.acceptance import verify_all

    outcome = verify_all(args.seed, out_dir=args.out)
    n_ok = sum(r.passed for r in outcome.results)
    print(f"{n_ok}/{len(outcome.results)} criteria passed")
    return outcome.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return {"run": cmd_run, "list": cmd_list, "verify-all": cmd_verify}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
