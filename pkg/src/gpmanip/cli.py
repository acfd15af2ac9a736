"""Command-line front end for single runs, experiment sweeps and plot tables.

Verbs: run, sweep-initial, sweep-sigma, transfer, plotdata. Flags mirror the
config field names; a `key = value` config file can supply any flag, with
command-line values winning. The output directory resolves in precedence
order: --output flag, GPMANIP_OUTPUT_DIR environment variable, config file,
default "out". Exit status: 0 on full success, 2 when individual runs
failed, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import ExperimentSpec, emit_plotdata, run_experiment
from .formats import ParseError
from .identify import ExplorationConfig
from .loop import LoopConfig
from .mpc import MpcConfig
from .plant import PRESETS, load_preset
from .trajectories import TRAJECTORY_NAMES

OUTPUT_ENV_VAR = "GPMANIP_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("exploration")
    g.add_argument("--random-actions", type=int, default=5)
    g.add_argument("--extra-actions", type=int, default=15)
    g.add_argument("--adapt-actions", type=int, default=3)
    g.add_argument("--exploration-range", type=float, default=1.0)
    g.add_argument("--control-dim", type=int, default=2)
    g = parser.add_argument_group("mpc")
    g.add_argument("--horizon", type=int, default=5)
    g.add_argument("--num-rollouts", type=int, default=50)
    g.add_argument("--optimization-scale", type=float, default=0.1)
    g.add_argument("--waypoint-spacing", type=float, default=0.5)
    g = parser.add_argument_group("loop")
    g.add_argument("--reach-tolerance", type=float, default=1.0)
    g.add_argument("--update-threshold", type=float, default=2.0)
    g.add_argument("--max-steps", type=int, default=2000)
    g = parser.add_argument_group("experiment")
    g.add_argument("--seed", type=int, default=0, help="seed base for run derivation")
    g.add_argument("--repetitions", type=int, default=None)
    g.add_argument("--scale", type=float, default=16.0, help="trajectory bounding box, mm")
    g.add_argument("--trajectories", default="square",
                   help=f"comma list from: {', '.join(TRAJECTORY_NAMES)}")
    g.add_argument("--output", default=None)
    g.add_argument("--config", default=None, help="key = value file supplying flag defaults")
    g.add_argument("--preset-file", default=None,
                   help="load a custom plant preset definition, usable by its name")


def build_parser() -> _Parser:
    parser = _Parser(prog="gpmanip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="single tracking task (one row per trajectory/preset)")
    p_run.add_argument("--presets", default="preset-4", help="comma list of plant presets")
    _add_common_flags(p_run)

    p_init = sub.add_parser("sweep-initial", help="sweep the number of initial exploratory actions")
    p_init.add_argument("--values", default="10,15,20,25,30", help="comma list of action totals")
    p_init.add_argument("--presets", default="preset-4")
    _add_common_flags(p_init)

    p_sigma = sub.add_parser("sweep-sigma", help="sweep the MPC optimization scale")
    p_sigma.add_argument("--values", default="0.005,0.02,0.1", help="comma list of scales")
    p_sigma.add_argument("--presets", default="drifting")
    _add_common_flags(p_sigma)

    p_tr = sub.add_parser("transfer", help="identify on a source preset, reuse on targets")
    p_tr.add_argument("--source", default="preset-4")
    p_tr.add_argument("--targets", default="preset-1,preset-2,preset-3,preset-5")
    _add_common_flags(p_tr)

    p_plot = sub.add_parser("plotdata", help="aggregate a summary report into a plot table")
    p_plot.add_argument("--report", required=True, help="path to a summary.csv")
    p_plot.add_argument("--output", default=None, help="output table path (default: stdout)")

    return parser


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', got {line!r}", lineno)
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> dict[str, str]:
    pre = _Parser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    file_values = _load_config_file(known.config)
    parsers = [parser]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            parsers.extend(action.choices.values())
    for p in parsers:
        typed: dict[str, object] = {}
        for action in p._actions:
            if action.dest in file_values and action.dest not in ("output", "config", "help"):
                raw = file_values[action.dest]
                typed[action.dest] = action.type(raw) if action.type else raw
        if typed:
            p.set_defaults(**typed)
    return file_values


def _resolve_output(args, file_values: dict[str, str]) -> str:
    if args.output:
        return args.output
    env = os.environ.get(OUTPUT_ENV_VAR)
    if env:
        return env
    return file_values.get("output", "out")


def _split(value: str) -> list[str]:
    return [tok for tok in (t.strip() for t in value.split(",")) if tok]


def _base_config(args) -> LoopConfig:
    return LoopConfig(
        exploration=ExplorationConfig(
            random_actions=args.random_actions,
            extra_actions=args.extra_actions,
            adapt_actions=args.adapt_actions,
            exploration_range=args.exploration_range,
            control_dim=args.control_dim,
        ),
        mpc=MpcConfig(
            horizon=args.horizon,
            num_rollouts=args.num_rollouts,
            optimization_scale=args.optimization_scale,
            waypoint_spacing=args.waypoint_spacing,
        ),
        reach_tolerance=args.reach_tolerance,
        update_threshold=args.update_threshold,
        max_steps=args.max_steps,
        seed=0,
    )


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        file_values = _apply_config_file(parser, argv)
    except (OSError, ParseError) as exc:
        print(f"gpmanip: config error: {exc}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verb == "plotdata":
        try:
            out = args.output or "plotdata.csv"
            emit_plotdata(args.report, out)
            print(f"wrote {out}")
            return 0
        except (OSError, ParseError) as exc:
            print(f"gpmanip: {exc}", file=sys.stderr)
            return 1

    try:
        base = _base_config(args)
        custom = None
        if args.preset_file:
            preset = load_preset(args.preset_file)
            custom = {preset.name: preset}
        kind, presets, values, default_reps = {
            "run": ("single", None, [], 1),
            "sweep-initial": ("initial_actions_sweep", None, None, 5),
            "sweep-sigma": ("sigma_sweep", None, None, 5),
            "transfer": ("transfer", None, [], 4),
        }[args.verb]
        if args.verb == "transfer":
            presets = [args.source] + _split(args.targets)
        else:
            presets = _split(args.presets)
        if values is None:
            caster = int if args.verb == "sweep-initial" else float
            values = [caster(v) for v in _split(args.values)]
        unknown = [p for p in presets if p not in PRESETS and (not custom or p not in custom)]
        if unknown:
            parser.error(f"unknown preset(s): {', '.join(unknown)}")
        spec = ExperimentSpec(
            kind=kind,
            trajectories=_split(args.trajectories),
            presets=presets,
            repetitions=args.repetitions if args.repetitions is not None else default_reps,
            sweep_values=values,
            seed_base=args.seed,
            output_path=_resolve_output(args, file_values),
            scale=args.scale,
        )
    except ValueError as exc:
        print(f"gpmanip: {exc}", file=sys.stderr)
        return 1

    try:
        report = run_experiment(spec, base, custom_presets=custom)
    except OSError as exc:
        print(f"gpmanip: i/o error: {exc}", file=sys.stderr)
        return 1
    ok = len(report.rows) - report.failures
    print(f"{ok}/{len(report.rows)} runs ok; summary: {report.summary_path}")
    if report.failures:
        print(f"{report.failures} run(s) failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
