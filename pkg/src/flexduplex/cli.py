"""Command-line entry point: ``flexduplex {gen,solve,sweep,aggregate}``.

Every subcommand accepts ``--config FILE`` holding a sweep-config JSON
document (the ``SweepConfig.to_dict`` layout; any subset of keys). Values are
resolved as built-in defaults, then the file, then explicitly passed flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .baselines import solve_dtdd, solve_fix
from .channel import build_channel, build_coupling
from .harness import (
    PROTOCOLS,
    SweepConfig,
    aggregate,
    format_table,
    generate_scenario,
    read_records,
    run_sweep,
    write_aggregates,
    write_records,
)
from .model import InvalidInputError, Scenario
from .solvers import solve_fp, solve_rmdi, solve_safp

log = logging.getLogger("flexduplex")

_SOLVER_FLAGS = {"nmax": "n_max", "niter": "n_iter", "eps": "epsilon", "alpha": "alpha", "seed": "seed"}


def _load_config(path: str | None) -> SweepConfig:
    if path is None:
        return SweepConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"config {path} must hold a JSON object")
    return SweepConfig.from_dict(data)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n")


def cmd_gen(args, config: SweepConfig) -> None:
    seed = config.seed if args.seed is None else args.seed
    scn = generate_scenario(config, args.inter, args.intra, seed)
    _emit(json.dumps(scn.to_dict(), indent=2), args.out)


def cmd_solve(args, config: SweepConfig) -> None:
    try:
        scn = Scenario.load(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read scenario {args.scenario}: {exc}") from exc
    overrides = {
        field: getattr(args, flag) for flag, field in _SOLVER_FLAGS.items() if getattr(args, flag) is not None
    }
    solver = replace(config.solver, trace=args.trace or config.solver.trace, **overrides)
    chan = build_channel(scn, config.channel)
    coupling = build_coupling(scn, chan, config.channel, config.flags)
    if args.protocol == "fix":
        res = solve_fix(scn, coupling)
    elif args.protocol == "dtdd":
        res = solve_dtdd(scn, coupling)
    elif args.protocol == "fp":
        res = solve_fp(scn, coupling, solver)
    elif args.protocol == "safp":
        res = solve_safp(scn, coupling, solver)
    else:
        res = solve_rmdi(scn, coupling, solver)
    _emit(res.to_json(include_trace=solver.trace), args.out)


def cmd_sweep(args, config: SweepConfig) -> None:
    overrides = {}
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = replace(config, **overrides)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_sweep(config, jobs=args.jobs, progress=args.verbose)
    write_records(records, out / "records.csv")
    agg = aggregate(records, config.bin_edges, config.low_high_split)
    write_aggregates(agg, out / "aggregates.json")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    print(format_table(agg))


def cmd_aggregate(args, config: SweepConfig) -> None:
    try:
        records = read_records(args.records)
    except OSError as exc:
        raise InvalidInputError(f"cannot read records {args.records}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"malformed records file {args.records}: {exc}") from exc
    agg = aggregate(records, config.bin_edges, config.low_high_split)
    if args.out is not None:
        write_aggregates(agg, args.out)
    print(format_table(agg))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexduplex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="sweep-config JSON file")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate one two-cell scenario as JSON")
    p.add_argument("--inter", type=int, required=True, help="cell-1 share of total demand, in tenths")
    p.add_argument("--intra", type=int, nargs=2, required=True, metavar=("UL1", "UL2"),
                   help="UL share of each cell's demand, in tenths")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", help="output file (default: stdout)")

    p = add("solve", cmd_solve, "solve one scenario with one protocol")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--protocol", choices=PROTOCOLS, default="safp")
    p.add_argument("--nmax", type=int, help="random restarts")
    p.add_argument("--niter", type=int, help="outer iteration cap")
    p.add_argument("--eps", type=float, help="convergence threshold")
    p.add_argument("--alpha", type=float, help="RMDI muting threshold")
    p.add_argument("--seed", type=int, help="solver seed")
    p.add_argument("--trace", action="store_true", help="include the iteration trace")
    p.add_argument("-o", "--out", help="output file (default: stdout)")

    p = add("sweep", cmd_sweep, "run the Monte-Carlo sweep")
    p.add_argument("--runs", type=int, help="runs per ratio combination")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = add("aggregate", cmd_aggregate, "recompute aggregates from a records CSV")
    p.add_argument("records", help="records CSV file")
    p.add_argument("-o", "--out", help="aggregates JSON output file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args, _load_config(args.config))
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
