"""Command-line entry point: ``maxinfo {train,bandit,tabular,aggregate}``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bandit, harness, tabular


def _add_config_flags(parser: argparse.ArgumentParser, command: str) -> None:
    parser.add_argument("--config", help="file of 'key = value' lines")
    for key, default in harness.default_config(command).items():
        parser.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            metavar=type(default).__name__.upper() if default is not None else "VALUE",
                            help=f"default: {harness.format_value(default)}")
    if command == "train":
        parser.add_argument("--steps", dest="total_steps", default=None, help="alias of --total-steps")


def _config_from_args(command: str, args: argparse.Namespace) -> dict:
    keys = harness.default_config(command)
    flags = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return harness.parse_config(command, flags, args.config)


def _bandit_seed(args):
    config, seed = args
    grid = bandit.make_grid(config["grid_size"])
    kernel = bandit.Kernel("rbf", config["lengthscale"])
    J = bandit.standard_objective(grid, kernel)
    return bandit.run_bandit(J, config["horizon"], config["alpha"], config["noise"], kernel, seed, grid)


def cmd_train(config: dict) -> int:
    for path in harness.run_seeds(config):
        print(path)
    return 0


def cmd_bandit(config: dict) -> int:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    seeds = [config["seed"] + i for i in range(config["seeds"])]
    jobs = [(config, s) for s in seeds]
    if harness.max_workers() > 1:
        with ProcessPoolExecutor(max_workers=harness.max_workers()) as pool:
            traces = list(pool.map(_bandit_seed, jobs))
    else:
        traces = [_bandit_seed(j) for j in jobs]
    stem = f"bandit-alpha{config['alpha']!r}-noise{config['noise']!r}"
    (out / f"{stem}.config").write_text(harness.config_snapshot(config), encoding="utf-8")
    T = config["horizon"]
    for s, tr in zip(seeds, traces):
        path = out / f"{stem}-seed{s}.csv"
        path.write_text(tr.to_csv(), encoding="utf-8")
        print(f"{path}  R_T/T = {tr.average(T):.6f}")
    print(f"median R_T/T over {len(seeds)} seeds: {np.median([tr.average(T) for tr in traces]):.6f}")
    return 0


def cmd_tabular(config: dict) -> int:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    report, rows = tabular.verify_lemmas(config["mdps"], config["seed"], config["gamma"])
    lines = ["mdp,n_states,n_actions,alpha1,alpha2,iterations,worst_monotone_violation,worst_oracle_error"]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    path = out / f"tabular-seed{config['seed']}.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / f"tabular-seed{config['seed']}.config").write_text(harness.config_snapshot(config),
                                                               encoding="utf-8")
    passed = report.n_mdps - max(report.monotone_failures, report.oracle_failures)
    print(f"{path}")
    print(f"monotone improvement: {report.n_mdps - report.monotone_failures}/{report.n_mdps} pass, "
          f"worst violation {report.worst_monotone_violation:.3e}")
    print(f"linear-solve oracle:  {report.n_mdps - report.oracle_failures}/{report.n_mdps} pass, "
          f"worst error {report.worst_oracle_error:.3e}")
    print(f"overall: {passed}/{report.n_mdps} MDPs pass")
    return 0 if report.passed else 1


def cmd_aggregate(directory: str) -> int:
    groups = harness.group_logs(directory)
    if not groups:
        print(f"no training logs found in {directory}", file=sys.stderr)
        return 1
    for name, paths in groups.items():
        out = Path(directory) / f"{name}.aggregate.csv"
        harness.aggregate_seeds(paths, out)
        print(f"{out}  ({len(paths)} seeds)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxinfo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, text in (("train", "train an agent on pendulum or cartpole"),
                          ("bandit", "epsilon-greedy GP bandit regret runs"),
                          ("tabular", "verify soft policy iteration on random MDPs")):
        _add_config_flags(sub.add_parser(command, help=text), command)
    agg = sub.add_parser("aggregate", help="mean/median/stderr across seed logs")
    agg.add_argument("directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "aggregate":
        return cmd_aggregate(args.directory)
    try:
        config = _config_from_args(args.command, args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return {"train": cmd_train, "bandit": cmd_bandit, "tabular": cmd_tabular}[args.command](config)


if __name__ == "__main__":
    sys.exit(main())
