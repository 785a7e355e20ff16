"""Named experiments and reproduction bundles for the command line."""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis
from .agents import TimeAgentConfig, preference_concession_offer
from .config import ExperimentConfig
from .protocol import Scenario, _fmt
from .training.loops import (TrainConfig, play_games, self_play_scenario, train_self_play,
                             train_vs_opponent, train_vs_tft)

ACCEPT_LR = 5e-5
OFFER_LR = 1e-4
BETA_LR = 1e-3
SELF_PLAY_LR = 1e-4
TFT_LR = 1e-4


def _opp(name, opponent, lr=ACCEPT_LR, epochs=8000, scenario=None, **train) -> ExperimentConfig:
    return ExperimentConfig(name=name, kind="opponent", scenario=scenario or Scenario(),
                            train=TrainConfig(learning_rate=lr, epochs=epochs,
                                              opponent=opponent, **train))


def _offer(name, kind, lr, epochs):
    return _opp(name, "time(c=1)", lr=lr, epochs=epochs, head_kind=kind,
                train_accept=False, train_offer=True)


def _self(name, mode):
    return ExperimentConfig(name=name, kind="selfplay", mode=mode,
                            scenario=self_play_scenario(mode),
                            train=TrainConfig(learning_rate=SELF_PLAY_LR, epochs=3000,
                                              train_offer=True))


def _tft(name, variant, discount=1.0):
    return ExperimentConfig(name=name, kind="tft", variant=variant,
                            scenario=Scenario(discount=discount),
                            train=TrainConfig(learning_rate=TFT_LR, epochs=5000,
                                              train_offer=True))


EXPERIMENTS: dict = {
    "accept_vs_linear": lambda: _opp("accept_vs_linear", "time(c=1)"),
    "accept_vs_conceder": lambda: _opp("accept_vs_conceder", "time(c=10)"),
    "accept_vs_boulware": lambda: _opp("accept_vs_boulware", "time(c=0.3)"),
    "offer_normal_vs_linear": lambda: _offer("offer_normal_vs_linear", "normal", OFFER_LR, 4000),
    "offer_cauchy_vs_linear": lambda: _offer("offer_cauchy_vs_linear", "cauchy", OFFER_LR, 4000),
    "offer_beta_vs_linear": lambda: _offer("offer_beta_vs_linear", "beta", BETA_LR, 5000),
    "selfplay_bargain": lambda: _self("selfplay_bargain", "minigame_bargain"),
    "selfplay_centipede": lambda: _self("selfplay_centipede", "minigame_centipede"),
    "selfplay_multivariate": lambda: _self("selfplay_multivariate", "multivariate"),
    "tft_relative": lambda: _tft("tft_relative", "relative"),
    "tft_bayesian": lambda: _tft("tft_bayesian", "bayesian", discount=0.95),
}


def get_experiment(name: str) -> ExperimentConfig:
    if name not in EXPERIMENTS:
        raise KeyError(name)
    return EXPERIMENTS[name]()


def run_experiment(cfg: ExperimentConfig, out_dir=None, overwrite: bool = False, resume=None):
    train = cfg.resolved_train()
    if cfg.kind == "opponent":
        return train_vs_opponent(train, out_dir, overwrite, resume)
    if cfg.kind == "selfplay":
        return train_self_play(train, cfg.mode, out_dir, overwrite, resume,
                               use_default_scenario=False)
    return train_vs_tft(train, cfg.variant, cfg.delta, out_dir, overwrite, resume)


# -- reproduction bundles --------------------------------------------------------

def write_csv(path, schema: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


@dataclasses.dataclass
class Scale:
    paper: bool

    def pick(self, desk, paper):
        return paper if self.paper else desk


def accept_rewards_by_round(c: float, scenario: Scenario) -> list:
    """Reward for accepting a noise-free preference-concession offer at each round."""
    cfg = TimeAgentConfig(concession=c, noise_sigma=0.0)
    T = scenario.deadline
    wa = scenario.weights("A")
    out = []
    rng = np.random.default_rng(0)
    for r in range(1, T + 1):
        kept_b = preference_concession_offer(cfg, (r - 1), T, scenario.weights("B"), rng)
        out.append(scenario.discount ** (r - 1) * float(wa @ (1.0 - kept_b)))
    return out


def _table_4_1(out: Path, seed: int, scale: Scale, plots: bool) -> list:
    d = 0.95
    scen = Scenario(discount=d)
    rows = []
    for c in (0.3, 0.95, 1.5, 2.0, 3.0, 5.0, 10.0):
        cfg = TrainConfig(learning_rate=ACCEPT_LR, epochs=scale.pick(3000, 8000),
                          opponent=f"time(c={c:g})", seed=seed, scenario=scen)
        res = train_vs_opponent(cfg)
        games = play_games(res.nets, cfg.opponent, scen, scale.pick(100, 400), seed)
        s = analysis.game_summary(games, scen)
        t_opt = analysis.optimal_stopping_time(c, d, scen.deadline)
        best = max(accept_rewards_by_round(c, scen))
        rows.append([c, d, t_opt, s["mean_time"], abs(s["mean_time"] - t_opt),
                     s["mean_reward"] - best,
                     100 * analysis.second_time_derivative(c, d, scen.deadline, t_opt)])
    write_csv(out / "table-4.1.csv", "table-4.1/1",
              ["c", "d", "t_opt", "mean_stop", "time_error", "reward_error", "second_deriv_x100"],
              rows)
    return ["time_error: |mean stop - t_opt|; expect large errors where the second derivative is near 0"]


def _table_4_2(out: Path, seed: int, scale: Scale, plots: bool) -> list:
    scen = Scenario(discount=0.94)
    rows = []
    for mode in ("planar", "preference"):
        opp = f"time(c=1,mode={mode})"
        cfg = TrainConfig(learning_rate=ACCEPT_LR, epochs=scale.pick(3000, 8000), opponent=opp,
                          seed=seed, scenario=scen)
        res = train_vs_opponent(cfg)
        games = play_games(res.nets, opp, scen, scale.pick(100, 400), seed)
        s = analysis.game_summary(games, scen)
        rows.append([mode, s["d_nash"], s["bid_distribution"], s["mean_reward"], s["mean_time"]])
        if plots:
            from .plotting import plot_outcomes
            pts = [analysis.outcome_points(scen, g.final_offer.share_for("A"))[0]
                   for g in games if g.accepted]
            plot_outcomes(pts, scen, out / f"table-4.2-{mode}.png", mode, nash=(4, 4))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    pts = analysis.outcome_points(scen, rng.random((scale.pick(10_000, 100_000), 3)))
    fr = analysis.pareto_frontier(scen)
    rows.append(["random", analysis.nash_distance(pts), analysis.bid_distribution(pts, fr),
                 math.nan, math.nan])
    write_csv(out / "table-4.2.csv", "table-4.2/1",
              ["method", "d_nash", "bid_distribution", "mean_reward", "mean_time"], rows)
    return ["random row: bid distribution 1.24 +/- 0.05, d_nash 1.92 +/- 0.1",
            "preference row: bid distribution near 0"]


def _table_4_4(out: Path, seed: int, scale: Scale, plots: bool) -> list:
    scen = Scenario()
    rows = []
    for kind, lr, ep in (("normal", OFFER_LR, 4000), ("cauchy", OFFER_LR, 4000),
                         ("beta", BETA_LR, 5000)):
        cfg = TrainConfig(learning_rate=lr, epochs=scale.pick(ep // 2, ep), opponent="time(c=1)",
                          seed=seed, head_kind=kind, train_accept=False, train_offer=True)
        res = train_vs_opponent(cfg)
        games = play_games(res.nets, cfg.opponent, scen, scale.pick(100, 400), seed)
        s = analysis.game_summary(games, scen)
        rows.append([kind, s["d_nash"], s["bid_distribution"], s["mean_reward"], s["mean_time"]])
    write_csv(out / "table-4.4.csv", "table-4.4/1",
              ["distribution", "d_nash", "bid_distribution", "mean_reward", "mean_time"], rows)
    return ["normal: bid distribution <= 0.2 and mean reward >= 4.5 at full length"]


def _training_figure(name: str, mode: str):
    def run(out: Path, seed: int, scale: Scale, plots: bool) -> list:
        cfg = get_experiment(name)
        full = cfg.train.epochs
        cfg = dataclasses.replace(cfg, seed=seed, train=dataclasses.replace(
            cfg.train, epochs=scale.pick(max(full // 2, 1), full)))
        res = run_experiment(cfg, out_dir=out / name, overwrite=True)
        if plots:
            from .plotting import plot_outcomes, plot_training
            plot_training(res.metrics, out / f"{name}.png", name)
            if mode == "outcomes":
                pts = [(r[6], r[7]) for r in res.outcomes if r[1] == "accepted"]
                col = [r[0] for r in res.outcomes if r[1] == "accepted"]
                plot_outcomes(pts, cfg.scenario, out / f"{name}-outcomes.png", name,
                              nash=(4, 4), color=col)
        return [f"{name}: see metrics.csv and outcomes.csv; trends are stochastic"]
    return run


def _fig_spne(tree_name: str):
    def run(out: Path, seed: int, scale: Scale, plots: bool) -> list:
        tree = analysis.FIG_CENTIPEDE if tree_name == "centipede" else \
            analysis.bargaining_tree([0.9, 0.9, 0.9, 0.9, 0.9, 0.9], 0.9)
        actions, value = analysis.backward_induction(tree)
        rows = [[i, tree.owner(i) + 1, a, *tree.payoffs[i]] for i, a in enumerate(actions)]
        rows.append(["root", "", "", *value])
        write_csv(out / f"spne-{tree_name}.csv", "spne/1",
                  ["node", "mover", "action", "payoff_p1", "payoff_p2"], rows)
        return ["centipede SPNE: defect everywhere, root payoff (0.9, 0.1)"]
    return run


def _eq_frontier(out: Path, seed: int, scale: Scale, plots: bool) -> list:
    fr = analysis.pareto_frontier(Scenario())
    write_csv(out / "frontier.csv", "frontier/1", ["a", "b", "c", "u_a_lo", "u_a_hi"],
              [[s.a, s.b, s.c, s.lo, s.hi] for s in fr.segments])
    return ["three segments: u_B = -u_A/3 + 6, -u_A + 8, -3 u_A + 18"]


REPRODUCTIONS: dict = {
    "table-4.1": _table_4_1,
    "table-4.2": _table_4_2,
    "table-4.4": _table_4_4,
    "fig-4.4": _training_figure("accept_vs_linear", "metrics"),
    "fig-4.9": _fig_spne("centipede"),
    "fig-4.10": _fig_spne("bargaining"),
    "fig-4.11a": _training_figure("selfplay_bargain", "metrics"),
    "fig-4.11b": _training_figure("selfplay_centipede", "metrics"),
    "fig-4.13": _training_figure("selfplay_multivariate", "metrics"),
    "fig-4.14": _training_figure("tft_relative", "outcomes"),
    "fig-4.15": _training_figure("tft_bayesian", "outcomes"),
    "eq-4.11": _eq_frontier,
}


def reproduce(ident: str, out: Path, seed: int = 0, paper_scale: bool = False,
              plots: bool = True) -> list:
    """Run one bundle into ``out``; returns tolerance notes for its README."""
    fn: Callable = REPRODUCTIONS[ident]
    out.mkdir(parents=True, exist_ok=True)
    notes = fn(out, seed, Scale(paper_scale), plots)
    with open(out / "README.txt", "w") as fh:
        fh.write(f"{ident} (seed {seed}, {'paper' if paper_scale else 'desk'} scale)\n")
        for n in notes:
            fh.write(f"- {n}\n")
    with open(out / "resolved.ini", "w") as fh:
        fh.write(f"[reproduce]\nid = {ident}\nseed = {seed}\npaper_scale = {str(paper_scale).lower()}\n")
    return notes
