"""Command-line driver: ``rulegoal {run,experiment,mine,validate-config}``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .agent import EpisodeResult, ExperimentResult, mine_buffer, run_episode, run_experiment
from .config import ExperimentConfig, load_config, override
from .core import dump_buffer, load_buffer
from .environment import ConfigurationError, goal_state

log = logging.getLogger("rulegoal")

CSV_COLUMNS = ("window_index", "actions_elapsed", "goals_in_window",
               "cumulative_goals", "random_action_fraction")


def rows_to_csv(rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for w, elapsed, goals, cumulative, frac in rows:
        writer.writerow([w, elapsed, _num(goals), _num(cumulative), f"{frac:.4f}"])
    return out.getvalue()


def _num(x) -> str:
    return str(x) if isinstance(x, int) else f"{x:.4f}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _emit_dumps(result: EpisodeResult, cfg: ExperimentConfig, out: Path, prefix: str = "") -> None:
    if cfg.output.dump_rules:
        _write(out / f"{prefix}laws.txt", result.law_dump())
    if cfg.output.dump_policies:
        _write(out / f"{prefix}policies.txt", result.policy_dump())
    _write(out / f"{prefix}subgoals.txt", result.discovery_log())
    if cfg.output.trace and result.trace:
        _write(out / f"{prefix}trace.txt", "\n".join(result.trace) + "\n")


def cmd_run(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.output.out_dir)
    result = run_episode(cfg.env, cfg.agent, trace=cfg.output.trace)
    _write(out / "stats.csv", rows_to_csv(result.stats.rows()))
    _write(out / "buffer.txt", dump_buffer(result.buffer))
    _emit_dumps(result, cfg, out)
    print(f"goals={result.stats.goals} actions={result.stats.actions} "
          f"random={result.stats.random_actions} subgoals={len(result.discoveries)}")
    return 0


def cmd_experiment(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.output.out_dir)

    def on_run(i: int, result: EpisodeResult) -> None:
        _write(out / f"run{i}.csv", rows_to_csv(result.stats.rows()))
        _emit_dumps(result, cfg, out, prefix=f"run{i}_")
        log.info("run %d: %d goals", i, result.stats.goals)

    exp: ExperimentResult = run_experiment(cfg.env, cfg.agent, cfg.runs, on_run)
    text = rows_to_csv(exp.mean_rows())
    _write(out / "experiment.csv", text)
    sys.stdout.write(text)
    return 0


def cmd_mine(cfg: ExperimentConfig, args) -> int:
    path = Path(args.buffer)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        buffer = load_buffer(lines, goal_state(cfg.env.k))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    result = mine_buffer(buffer, cfg.agent, subgoals=not args.no_subgoals)
    out = Path(cfg.output.out_dir)
    _write(out / "laws.txt", result.law_dump())
    _write(out / "policies.txt", result.policy_dump())
    _write(out / "subgoals.txt", result.discovery_log())
    print(f"laws={len(result.laws)} policies={sum(map(len, result.policies.values()))} "
          f"subgoals={len(result.discoveries)}")
    return 0


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    sys.stdout.write(cfg.to_ini())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=int, help="number of item types")
    common.add_argument("--runs", type=int)
    common.add_argument("--max-actions", type=int)
    common.add_argument("--out-dir")
    common.add_argument("--subgoal-capacity", type=int)
    common.add_argument("--dump-rules", action="store_true")
    common.add_argument("--dump-policies", action="store_true")
    common.add_argument("--trace", action="store_true", help="write the per-action decision trace")
    common.add_argument("--random", action="store_true", help="random-policy baseline (no learning)")

    parser = argparse.ArgumentParser(prog="rulegoal", description="Rule-based hierarchical agent experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one episode; stats CSV, buffer and dumps")
    sub.add_parser("experiment", parents=[common], help="several seeded episodes; averaged CSV")
    mine = sub.add_parser("mine", parents=[common], help="offline learning on a recorded buffer")
    mine.add_argument("buffer", help="buffer file as written by 'run'")
    mine.add_argument("--no-subgoals", action="store_true")
    sub.add_parser("validate-config", parents=[common], help="check a config and print it resolved")
    return parser


COMMANDS = {"run": cmd_run, "experiment": cmd_experiment, "mine": cmd_mine,
            "validate-config": cmd_validate}


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config, k=args.k)
    cfg = override(cfg, seed=args.seed, runs=args.runs, max_actions=args.max_actions,
                   out_dir=args.out_dir, subgoal_capacity=args.subgoal_capacity,
                   dump_rules=args.dump_rules, dump_policies=args.dump_policies,
                   trace=args.trace)
    if args.random:
        cfg = replace(cfg, agent=replace(cfg.agent, learning=False))
    return cfg


def _setup_logging() -> None:
    level = os.environ.get("RULEGOAL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigurationError as exc:
        print(f"rulegoal: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rulegoal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
