# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Command line entry point ``marssim``.

Exit status is 0 on success, 2 for configuration errors, 3 for trace errors,
4 for mismatched comparisons and 1 for any other simulator error.
"""

__all__ = ["EXIT_CODES", "main"]

import argparse
import logging
import sys

from marssim.__version__ import __version__
from marssim.core.metrics import locality
from marssim.core.traffic import read_trace
from marssim.core.utils import ConfigError
from marssim.core.utils import ConfigMismatchError
from marssim.core.utils import MarsSimError
from marssim.core.utils import TraceError
from marssim.core.utils import set_log_level
from marssim.harness.config import load_config
from marssim.harness.experiment import SWEEP_PARAMETERS
from marssim.harness.experiment import run_experiment
from marssim.harness.experiment import sweep
from marssim.harness.report import load_records
from marssim.harness.report import report

EXIT_CODES = {ConfigError: 2, TraceError: 3, ConfigMismatchError: 4}


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="marssim",
        description="Page-grouping reorder stage in front of a DRAM model: baseline vs reorder experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="parallel seeds")
    p.add_argument("--output", help="output directory (overrides the config)")
    p.add_argument("--svg", action="store_true", help="also render SVG charts")

    p = sub.add_parser("sweep", help="run a config over several values of one parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMETERS)}")
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 1,512 or 64x2,32x4")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")

    p = sub.add_parser("locality", help="page locality of a request trace")
    p.add_argument("trace", help="trace path or URL")
    p.add_argument("--window", type=_int_list, default=[128, 512, 2048, 8192, 16384])
    p.add_argument("--page-offset-bits", type=int, default=12)

    p = sub.add_parser("report", help="summarize result directories")
    p.add_argument("directory")
    p.add_argument("--output", help="report directory (defaults to DIRECTORY)")
    p.add_argument("--svg", action="store_true")

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    record = run_experiment(cfg, jobs=args.jobs, output_dir=args.output)
    report([record], cfg.output_path(args.output), svg=args.svg)
    for rep, seed in zip(record.improvements(), record.seeds, strict=False):
        print(
            f"{cfg.name} seed {seed}: CAS/ACT x{rep.cas_per_act_ratio:.2f} "
            f"({rep.cas_per_act_delta_pct:+.1f} %), bandwidth {rep.bandwidth_delta_pct:+.1f} %"
        )


def _cmd_sweep(args):
    cfg = load_config(args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    records = sweep(cfg, args.param, values, jobs=args.jobs, output_dir=args.output)
    for value, record in zip(values, records, strict=True):
        parts = [f"{args.param}={value}"]
        for p in record.pipelines:
            parts.append(f"{p} CAS/ACT {record.mean(p, 'cas_per_act'):.2f}")
        print(", ".join(parts))


def _cmd_locality(args):
    stream = read_trace(args.trace)
    print("window_size,locality")
    for w in args.window:
        mean = locality(stream, w, args.page_offset_bits).mean
        print(f"{w},{'' if mean is None else f'{mean:.6g}'}")


def _cmd_report(args):
    records = load_records(args.directory)
    paths = report(records, args.output or args.directory, svg=args.svg)
    print(paths["summary_txt"].read_text(), end="")


def _cmd_validate(args):
    cfg = load_config(args.config)
    print(f"{cfg.name}: ok (config {cfg.digest()[:12]})")


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "locality": _cmd_locality,
    "report": _cmd_report,
    "validate": _cmd_validate,
}


def main(argv=None):
    """Run the command line; returns the exit status."""
    args = _build_parser().parse_args(argv)
    if args.verbose:
        set_log_level(logging.DEBUG)
    elif args.quiet:
        set_log_level(logging.WARNING)
    try:
        _COMMANDS[args.command](args)
    except MarsSimError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return next((code for cls, code in EXIT_CODES.items() if isinstance(e, cls)), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
