"""Command-line entry point: ``negotiate {train,selfplay,play,analyze,reproduce}``.

Outputs go under ``$NEGRL_OUTPUT_ROOT`` (default ``./runs``) unless ``--out``
is given. Every run writes ``resolved.ini`` next to its CSVs; feeding that
file back through ``--config`` reproduces the run byte for byte. Existing
output directories are only reused with ``--overwrite``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .agents import make_agent
from .config import ConfigError, apply_overrides, dump_config, parse_config_text
from .experiments import EXPERIMENTS, REPRODUCTIONS, get_experiment, reproduce, run_experiment, write_csv
from .neural.checkpoint import CheckpointError, load_checkpoint
from .protocol import ContractViolation, Scenario, run_negotiation, write_transcripts
from .training.loops import SELF_PLAY_MODES, play_games, self_play_scenario
from .training.rewards import penalty_rewards

ENV_ROOT = "NEGRL_OUTPUT_ROOT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("negotiation_rl")


class UsageError(Exception):
    pass


def output_root() -> Path:
    return Path(os.environ.get(ENV_ROOT, "runs"))


def _prepare_out(path: Path, overwrite: bool) -> Path:
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise UsageError(f"output directory {path} is not empty; pass --overwrite to reuse it")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args, base):
    cfg = base
    if args.config:
        p = Path(args.config)
        try:
            text = p.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {p}: {exc}") from exc
        cfg = parse_config_text(text, cfg, source=str(p))
    cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, epochs=args.epochs))
    return cfg


def _run_training(cfg, args) -> int:
    if cfg.kind == "opponent" and not cfg.train.opponent:
        raise UsageError("missing required field train.opponent (the scripted opponent spec)")
    if cfg.kind == "opponent":
        try:
            make_agent(cfg.train.opponent)
        except ValueError as exc:
            raise UsageError(f"invalid train.opponent: {exc}") from exc
    out = Path(args.out or cfg.output_dir or output_root() / "train" / f"{cfg.name}-seed{cfg.seed}")
    _prepare_out(out, args.overwrite)
    snapshot = dataclasses.replace(cfg, output_dir=None)
    (out / "resolved.ini").write_text(dump_config(snapshot))
    res = run_experiment(cfg, out_dir=out, overwrite=args.overwrite, resume=args.resume)
    if args.plot:
        from .plotting import plot_training
        plot_training(res.metrics, out / "metrics.png", cfg.name)
    print(f"wrote {len(res.metrics)} epochs to {out}")
    if res.halted:
        print("training diverged; partial outputs kept", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_train(args) -> int:
    if args.experiment:
        try:
            base = get_experiment(args.experiment)
        except KeyError:
            raise UsageError(f"unknown experiment {args.experiment!r}; "
                             f"choose from {', '.join(sorted(EXPERIMENTS))}")
    else:
        from .config import ExperimentConfig
        base = ExperimentConfig()
        if not args.config:
            raise UsageError("give --experiment or --config")
    return _run_training(_load_config(args, base), args)


def cmd_selfplay(args) -> int:
    name = {"minigame_bargain": "selfplay_bargain", "minigame_centipede": "selfplay_centipede",
            "multivariate": "selfplay_multivariate"}[args.mode]
    base = get_experiment(name)
    base = dataclasses.replace(base, scenario=self_play_scenario(args.mode))
    return _run_training(_load_config(args, base), args)


def _scenario_from(args) -> Scenario:
    from .config import ExperimentConfig
    cfg = apply_overrides(ExperimentConfig(), args.set)
    return cfg.scenario


SUMMARY_SCHEMA = "negotiation-summary/1"


def cmd_play(args) -> int:
    scen = _scenario_from(args)
    try:
        make_agent(args.opponent)
    except ValueError as exc:
        raise UsageError(f"invalid --opponent: {exc}") from exc
    if args.games < 0:
        raise UsageError("--games must be non-negative")
    stem = Path(args.checkpoint).stem if args.checkpoint else (args.agent or "agent").split("(")[0]
    out = _prepare_out(Path(args.out or output_root() / "play" / f"{stem}-seed{args.seed}"),
                       args.overwrite)
    if args.checkpoint:
        nets, _, header = load_checkpoint(args.checkpoint)
        mine = {k: v for k, v in nets.items() if k in ("A_accept", "A_offer")}
        if not mine:
            raise CheckpointError("checkpoint holds no player-A networks to play")
        for k, net in mine.items():
            if net.input_dim != scen.issue_count + 1:
                raise CheckpointError(f"{k} expects {net.input_dim - 1} issues, "
                                      f"scenario has {scen.issue_count}")
            if k == "A_offer" and getattr(net, "issues", None) != scen.issue_count:
                raise CheckpointError("offer net issue count does not match the scenario")
        games = play_games(mine, args.opponent, scen, args.games, args.seed, greedy=args.greedy)
        seed_note = header.get("seed")
    else:
        spec = args.agent or "random"
        try:
            make_agent(spec)
        except ValueError as exc:
            raise UsageError(f"invalid --agent: {exc}") from exc
        games = [run_negotiation(make_agent(spec), make_agent(args.opponent), scen,
                                 np.random.SeedSequence(args.seed, spawn_key=(2, g)),
                                 rewards=penalty_rewards(), game_id=g)
                 for g in range(args.games)]
        seed_note = None
    with open(out / "games.csv", "w", newline="") as fh:
        write_transcripts(games, scen.issue_count, fh)
    s = analysis.game_summary(games, scen)
    write_csv(out / "summary.csv", SUMMARY_SCHEMA, list(analysis.SUMMARY_COLUMNS),
              [[s[k] for k in analysis.SUMMARY_COLUMNS]])
    lines = ["[play]", f"checkpoint = {args.checkpoint or 'none'}",
             f"agent = {args.agent or 'none'}", f"opponent = {args.opponent}",
             f"games = {args.games}", f"seed = {args.seed}",
             f"greedy = {str(args.greedy).lower()}", f"checkpoint_seed = {seed_note}", "",
             "[scenario]"]
    for k in ("weights_a", "weights_b", "discount", "deadline", "reserve", "growth"):
        lines.append(f"{k} = {getattr(scen, k)}")
    (out / "resolved.ini").write_text("\n".join(lines) + "\n")
    print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in s.items()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    scen = _scenario_from(args)
    out = _prepare_out(Path(args.out or output_root() / "analyze"), args.overwrite)
    fr = analysis.pareto_frontier(scen)
    write_csv(out / "frontier.csv", "frontier/1", ["a", "b", "c", "u_a_lo", "u_a_hi"],
              [[s.a, s.b, s.c, s.lo, s.hi] for s in fr.segments])
    shares, point = analysis.nash_solution(scen, args.grid_step)
    write_csv(out / "nash.csv", "nash/1",
              [*(f"share_{i + 1}" for i in range(len(shares))), "u_a", "u_b", "product"],
              [[*shares, point.u_a, point.u_b, analysis.nash_product(point)]])
    cs = [float(v) for v in args.cs.split(",")]
    ds = [float(v) for v in args.ds.split(",")]
    T = scen.deadline
    grid = analysis.stopping_grid(cs, ds, T)
    write_csv(out / "stopping_grid.csv", "stopping-grid/1",
              ["c", "d", "t_opt", "t_argmax"], grid)
    deriv = []
    for c in cs:
        for d in ds:
            t = analysis.optimal_stopping_time(c, d, T)
            deriv.append([c, d, t, analysis.own_marginal_utility(c, d, T, t),
                          analysis.second_time_derivative(c, d, T, t),
                          analysis.nth_time_derivative(c, d, T, t, 3)])
    write_csv(out / "derivatives.csv", "derivatives/1",
              ["c", "d", "t", "first", "second", "third"], deriv)
    rows = []
    for name, tree in (("centipede", analysis.FIG_CENTIPEDE),
                       ("bargaining", analysis.bargaining_tree([0.9] * 6, 0.9))):
        actions, value = analysis.backward_induction(tree)
        rows.append([name, "".join(actions), value[0], value[1]])
    write_csv(out / "spne.csv", "spne-summary/1", ["tree", "actions", "payoff_p1", "payoff_p2"],
              rows)
    if args.plot:
        from .plotting import plot_stopping
        plot_stopping([r[:3] for r in grid], out / "stopping_grid.png")
    print(f"wrote analysis CSVs to {out}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.id is None or args.id not in REPRODUCTIONS:
        menu = ", ".join(sorted(REPRODUCTIONS))
        if args.id is None:
            print(f"available ids: {menu}")
            return EXIT_OK
        raise UsageError(f"unknown id {args.id!r}; available ids: {menu}")
    out = _prepare_out(Path(args.out or output_root() / "reproduce" / args.id), args.overwrite)
    notes = reproduce(args.id, out, args.seed, args.paper_scale, args.plot)
    for n in notes:
        print(n)
    print(f"wrote {args.id} to {out}")
    return EXIT_OK


def _common(p, seed_default=None):
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", help="output directory (default under $%s)" % ENV_ROOT)
    p.add_argument("--overwrite", action="store_true", help="reuse a non-empty output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config field; repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="negotiate", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, helptext in (("train", "train against a scripted opponent or from a config"),
                           ("selfplay", "train two learners against each other")):
        p = sub.add_parser(name, help=helptext)
        if name == "train":
            p.add_argument("--experiment", help=f"one of: {', '.join(sorted(EXPERIMENTS))}")
        else:
            p.add_argument("--mode", required=True, choices=SELF_PLAY_MODES)
        p.add_argument("--config", help="INI file overlaid on the experiment defaults")
        p.add_argument("--epochs", type=int)
        p.add_argument("--resume", help="checkpoint to continue from")
        p.add_argument("--plot", action="store_true", help="also render metrics.png")
        _common(p)

    p = sub.add_parser("play", help="evaluate a frozen checkpoint or a scripted agent")
    p.add_argument("--checkpoint")
    p.add_argument("--agent", help="scripted agent spec used when no checkpoint is given")
    p.add_argument("--opponent", required=True)
    p.add_argument("--games", type=int, default=100)
    p.add_argument("--greedy", action="store_true", help="take the most likely action")
    _common(p, seed_default=0)

    p = sub.add_parser("analyze", help="closed-form oracles as CSV")
    p.add_argument("--cs", default="0.3,0.95,1,1.5,2,3,5,10")
    p.add_argument("--ds", default="0.85,0.9,0.95,0.99,1")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--plot", action="store_true")
    _common(p)

    p = sub.add_parser("reproduce", help="regenerate a table or figure's data")
    p.add_argument("id", nargs="?")
    p.add_argument("--paper-scale", action="store_true", help="full epoch and game counts")
    p.add_argument("--no-plots", dest="plot", action="store_false")
    _common(p, seed_default=0)
    return ap


COMMANDS = {"train": cmd_train, "selfplay": cmd_selfplay, "play": cmd_play,
            "analyze": cmd_analyze, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CheckpointError as exc:
        print(f"error: checkpoint schema: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ConfigError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
