"""Command line interface.

    maxlab list
    maxlab run <experiment> [--config FILE] [--out DIR] [--seed N] [--no-plots]
    maxlab replay <failure.json>
    maxlab plot <file.csv> [--out FILE]

``run`` exits with status 0 exactly when every asserted band passes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..errors import MaxlabError
from . import experiments
from .config import load_config
from .invariants import replay


def _cmd_list(args) -> int:
    for name in experiments.EXPERIMENTS:
        print(f"{name:22s} {experiments.DESCRIPTIONS[name]}")
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = load_config(args.experiment, args.config, overrides)
    out = Path(args.out) if args.out else Path("results") / args.experiment
    rep = experiments.run(args.experiment, cfg, out)
    rep.write(out, cfg.to_dict())
    if not args.no_plots:
        from . import plotting
        rep.artifacts += [p.name for p in plotting.render_report(rep, out)]
        rep.write(out, cfg.to_dict())
    print(rep.summary())
    print(f"results written to {out}")
    return 0 if rep.passed else 1


def _cmd_replay(args) -> int:
    record = json.loads(Path(args.failure).read_text())
    result = replay(record)
    print(json.dumps(result, indent=2, default=float))
    return 0 if result.get("passed") else 1


def _cmd_plot(args) -> int:
    from . import plotting
    path = plotting.plot_csv(args.csv, args.out)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxlab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list the experiments")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("run", help="run an experiment and write its report")
    p.add_argument("experiment", choices=list(experiments.EXPERIMENTS))
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", help="output directory (default results/<experiment>)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--no-plots", action="store_true", help="skip the matplotlib figures")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="recompute the value behind a failure record")
    p.add_argument("failure", help="failure_NNN.json written by a failing run")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("plot", help="plot a CSV file written by a run")
    p.add_argument("csv")
    p.add_argument("--out", help="image path (default: next to the CSV, .png)")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MaxlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
