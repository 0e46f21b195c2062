"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiment.config import ConfigError, load_config
from .experiment.runner import CompareError, compare_runs, parse_grid, run_experiment, sweep
from .mclachlan import NumericalError
from .pauli import StateNormError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _global_options(parser, default):
    # accepted before or after the subcommand
    def d(value):
        return value if default else argparse.SUPPRESS

    parser.add_argument("--out", default=d(None),
                        help="output directory (overrides output.directory)")
    parser.add_argument("--threads", type=int, default=d(1),
                        help="worker processes for sweeps (default 1)")
    parser.add_argument("--seedless", action="store_true", default=d(False),
                        help="no-op: every computation is deterministic and uses no RNG")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avqds", description=__doc__.splitlines()[0])
    _global_options(parser, default=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common],
                       help="run one experiment config (file or bundled recipe name)")
    p.add_argument("config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set model.n=6 (repeatable)")

    p = sub.add_parser("compare", parents=[common], help="deviation of run A from reference run B")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--t-max", type=float, default=None, help="restrict to t <= T_MAX")

    p = sub.add_parser("sweep", parents=[common],
                       help="run a config over a parameter grid and fit scaling laws")
    p.add_argument("template")
    p.add_argument("--grid", action="append", default=[], metavar="KEY=SPEC",
                   help="'model.n=4:8' (inclusive range) or 'key=v1,v2'; repeatable")
    p.add_argument("--cut-times", default=None, help="comma-separated times for N_cx cuts")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def _cmd_run(args) -> int:
    cfg, _ = load_config(args.config, args.set)
    res = run_experiment(cfg, args.out, extra_metadata={"threads": args.threads})
    out = args.out or cfg.output.directory
    final = res.metadata["final"]
    print(f"wrote {len(res.rows)} records to {out} (final {json.dumps(final)})")
    if res.metadata["stalled_steps"]:
        print(f"warning: {res.metadata['stalled_steps']} stalled adaptive steps", file=sys.stderr)
    return EXIT_OK


def _cmd_compare(args) -> int:
    report = compare_runs(args.dir_a, args.dir_b, args.t_max)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "compare.json").write_text(text + "\n")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg, _ = load_config(args.template, args.set)  # validates the template itself
    data = cfg.model_dump(mode="json")
    spec = cfg.sweep
    grid = parse_grid(args.grid) if args.grid else (dict(spec.grid) if spec else {})
    if not grid:
        raise ConfigError("sweep: no grid given (use --grid or a sweep block in the template)")
    if args.cut_times is not None:
        cuts = [float(x) for x in args.cut_times.split(",") if x]
    else:
        cuts = list(spec.cut_times) if spec else []
    kwargs = {}
    if spec:
        kwargs = {"fit_variable": spec.fit_variable, "fit_columns": list(spec.fit_columns)}
    out = args.out or cfg.output.directory
    summary = sweep(data, grid, out, cuts, threads=args.threads, **kwargs)
    n_bad = sum(r["status"] != "ok" for r in summary["rows"])
    print(json.dumps({"rows": len(summary["rows"]), "failed": n_bad, "fits": summary["fits"]},
                     indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "sweep": _cmd_sweep}[args.command]
    try:
        return handler(args)
    except (ConfigError, CompareError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, StateNormError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
