"""Training loops: against scripted opponents, against tit-for-tat, and self-play.

Seeding: a master seed ``s`` yields ``SeedSequence(s, spawn_key=(0,))`` for
network initialisation and ``SeedSequence(s, spawn_key=(1, e))`` for the game
of epoch ``e``. The engine splits each game stream between the two players, so
opponent noise and policy sampling never share a generator.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..agents import make_agent
from ..neural.checkpoint import load_checkpoint, save_checkpoint
from ..neural.nets import AcceptNet, OfferNet
from ..neural.optim import AdamState
from ..protocol import (ContractViolation, PLAYERS, Scenario, _fmt, run_negotiation)
from .agent import NeuralAgent
from .rewards import DEFAULT_K, penalty_rewards
from .updates import DivergenceError, accept_net_update, offer_net_update

log = logging.getLogger(__name__)

METRICS_SCHEMA = "negotiation-metrics/1"
OUTCOMES_SCHEMA = "negotiation-outcomes/1"
METRICS_COLUMNS = ["epoch", "reward_p1", "reward_p2", "playout_time", "critic_loss",
                   "actor_loss", "mean_sigma_1", "mean_sigma_2", "mean_sigma_3"]
OUTCOME_COLUMNS = ["epoch", "end_state", "end_round", "share_1", "share_2", "share_3",
                   "utility_p1", "utility_p2"]

SELF_PLAY_MODES = ("minigame_bargain", "minigame_centipede", "multivariate")
TFT_VARIANTS = ("relative", "bayesian")
HEAD_CHOICES = ("normal", "cauchy", "beta")


@dataclass(frozen=True)
class MiniGameActionSet:
    """The two kept shares available in the univariate mini-games."""

    rational: float = 0.9
    fair: float = 0.5

    @property
    def offers(self) -> np.ndarray:
        return np.array([[self.rational], [self.fair]])


MINI_GAME_ACTIONS = MiniGameActionSet()


@dataclass
class TrainConfig:
    learning_rate: float = 3e-5
    epochs: int = 8000
    head_kind: str = "normal"
    opponent: Optional[str] = None
    scenario: Scenario = field(default_factory=Scenario)
    K: float = DEFAULT_K
    seed: int = 0
    train_accept: bool = True
    train_offer: bool = False
    offer_learning_rate: Optional[float] = None
    early_stop_window: int = 500
    early_stop_threshold: float = 0.0
    checkpoint_every: int = 0
    accept_hidden: int = 512
    offer_hidden: int = 256
    head_hidden: int = 64
    out_gain: float = 0.1
    entropy_form: str = "paper"
    entropy_coef: float = 1.0
    beta_offset: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0 or (self.offer_learning_rate or 0) < 0:
            raise ContractViolation("learning rates must be non-negative")
        if self.epochs < 0:
            raise ContractViolation("epochs must be non-negative")
        if self.head_kind not in HEAD_CHOICES:
            raise ContractViolation(f"head_kind must be one of {HEAD_CHOICES}")
        if self.K < 0:
            raise ContractViolation("conflict penalty K must be non-negative")
        if self.early_stop_window < 1:
            raise ContractViolation("early_stop_window must be positive")

    @property
    def offer_lr(self) -> float:
        return self.learning_rate if self.offer_learning_rate is None else self.offer_learning_rate


@dataclass
class TrainResult:
    metrics: list
    outcomes: list
    nets: dict
    adams: dict
    halted: bool = False
    stopped_at: Optional[int] = None
    checkpoints: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = METRICS_COLUMNS.index(name)
        return np.array([row[i] for row in self.metrics], float)


# -- construction -------------------------------------------------------------

def init_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def game_seed(seed: int, epoch: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(1, epoch))


def _accept_net(cfg: TrainConfig, input_dim: int, rng, n_actions: int = 2) -> AcceptNet:
    return AcceptNet(input_dim, cfg.accept_hidden, n_actions, rng, cfg.out_gain)


def _offer_net(cfg: TrainConfig, input_dim: int, issues: int, rng) -> OfferNet:
    return OfferNet(input_dim, cfg.head_kind, issues=issues, hidden=cfg.offer_hidden,
                    head_hidden=cfg.head_hidden, value_hidden=cfg.head_hidden, rng=rng,
                    out_gain=cfg.out_gain, beta_offset=cfg.beta_offset)


def _adam_for(name: str, net, cfg: TrainConfig) -> AdamState:
    lr = cfg.offer_lr if "offer" in name else cfg.learning_rate
    return AdamState.for_params(net.parameters(), lr)


# -- the generic epoch loop ---------------------------------------------------

def _run_loop(cfg: TrainConfig, nets: dict, players: dict, opponent_specs: dict, *,
              first_mover: str, one_sided: bool, out_dir=None, overwrite: bool = False,
              resume=None, tag: str = "train") -> TrainResult:
    """Play ``cfg.epochs`` games and update every net in ``nets`` after each.

    ``players`` maps "A"/"B" to a NeuralAgent or ``None``; ``None`` slots are
    filled by a fresh scripted agent built from ``opponent_specs`` each epoch.
    Net names encode ownership: ``<player>_accept`` or ``<player>_offer``.
    """
    adams = {name: _adam_for(name, net, cfg) for name, net in nets.items()}
    start = 0
    if resume is not None:
        loaded, loaded_adams, header = load_checkpoint(resume)
        if set(loaded) != set(nets):
            raise ContractViolation("checkpoint nets do not match this experiment")
        for name in nets:
            if loaded[name].architecture() != nets[name].architecture():
                raise ContractViolation(f"architecture mismatch for {name}")
            nets[name].load_parameters(loaded[name].parameters())
            adams[name] = loaded_adams[name]
        start = int(header["meta"].get("epoch", -1)) + 1

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "checkpoints").mkdir(exist_ok=True)

    reward_fn = penalty_rewards(cfg.K)
    scenario = cfg.scenario
    result = TrainResult([], [], nets, adams)
    times = []

    def checkpoint(epoch: int, final: bool = False):
        if out is None:
            return
        name = "final.ckpt" if final else f"epoch_{epoch:06d}.ckpt"
        path = out / "checkpoints" / name
        save_checkpoint(path, nets, adams, cfg.seed, {"epoch": epoch, "tag": tag},
                        overwrite=overwrite or not path.exists())
        result.checkpoints.append(path)

    last = start - 1
    for epoch in range(start, cfg.epochs):
        seats = {}
        for p in PLAYERS:
            seats[p] = players[p] if players[p] is not None else make_agent(opponent_specs[p])
        tr = run_negotiation(seats["A"], seats["B"], scenario, game_seed(cfg.seed, epoch),
                             first_mover=first_mover, one_sided=one_sided, rewards=reward_fn,
                             game_id=epoch)
        critic = actor = 0.0
        sigmas = [math.nan] * 3
        try:
            for name, net in nets.items():
                owner, role = name.split("_", 1)
                agent = players[owner]
                if role == "accept":
                    buf = agent.accept_buffer
                else:
                    buf = agent.offer_buffer
                if not len(buf):
                    continue
                if isinstance(net, OfferNet):
                    ls = offer_net_update(buf, net, adams[name], cfg.entropy_form, cfg.entropy_coef)
                    for i, s in enumerate(ls.mean_sigma[:3]):
                        sigmas[i] = s
                else:
                    ls = accept_net_update(buf, net, adams[name])
                critic += ls.critic
                actor += ls.actor
        except DivergenceError as exc:
            log.error("training diverged at epoch %d: %s", epoch, exc)
            result.halted = True
            checkpoint(last, final=True)
            break
        ra, rb = tr.final_rewards
        result.metrics.append([epoch, ra, rb, tr.end_round, critic, actor, *sigmas])
        result.outcomes.append(_outcome_row(epoch, tr, scenario))
        times.append(tr.end_round)
        last = epoch
        if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            checkpoint(epoch)
        w = cfg.early_stop_window
        if len(times) >= w and float(np.std(times[-w:])) < cfg.early_stop_threshold:
            result.stopped_at = epoch
            break
    if not result.halted:
        checkpoint(last, final=True)
    if out is not None:
        write_metrics(out / "metrics.csv", result.metrics)
        write_outcomes(out / "outcomes.csv", result.outcomes)
    return result


def _outcome_row(epoch: int, tr, scenario: Scenario) -> list:
    if tr.accepted:
        x = tr.final_offer.share_for("A")
        ua = float(scenario.weights("A") @ x)
        ub = float(scenario.weights("B") @ (1.0 - x))
    else:
        x = np.full(scenario.issue_count, math.nan)
        ua = ub = 0.0
    shares = list(x[:3]) + [math.nan] * (3 - min(3, len(x)))
    return [epoch, tr.end_state, tr.end_round, *shares, ua, ub]


def _write_csv(path, schema: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_metrics(path, rows) -> None:
    _write_csv(path, METRICS_SCHEMA, METRICS_COLUMNS, rows)


def write_outcomes(path, rows) -> None:
    _write_csv(path, OUTCOMES_SCHEMA, OUTCOME_COLUMNS, rows)


# -- public entry points -------------------------------------------------------

def train_vs_opponent(config: TrainConfig, out_dir=None, overwrite: bool = False,
                      resume=None) -> TrainResult:
    """Train the neural agent (player A) against a scripted opponent (player B).

    Accept-only runs let the opponent propose and only the neural agent
    decide; offer-only runs let the neural agent propose and only the
    opponent decide. Training both plays the full alternating protocol with
    the neural agent moving first.
    """
    if not config.opponent:
        raise ContractViolation("opponent spec is required")
    if not (config.train_accept or config.train_offer):
        raise ContractViolation("nothing to train: enable accept and/or offer")
    make_agent(config.opponent)  # validate early
    m = config.scenario.issue_count
    rng = init_rng(config.seed)
    nets = {}
    if config.train_accept:
        nets["A_accept"] = _accept_net(config, m + 1, rng)
    if config.train_offer:
        nets["A_offer"] = _offer_net(config, m + 1, m, rng)
    neural = NeuralAgent(nets.get("A_accept"), nets.get("A_offer"))
    if config.train_accept and config.train_offer:
        first, one_sided = "A", False
    elif config.train_accept:
        first, one_sided = "B", True
    else:
        first, one_sided = "A", True
    return _run_loop(config, nets, {"A": neural, "B": None}, {"B": config.opponent},
                     first_mover=first, one_sided=one_sided, out_dir=out_dir,
                     overwrite=overwrite, resume=resume, tag="vs_opponent")


def train_vs_tft(config: TrainConfig, variant: str = "relative", delta: int = 1,
                 out_dir=None, overwrite: bool = False, resume=None) -> TrainResult:
    """Both nets against a tit-for-tat agent that bids first.

    Only the neural agent can end the game by accepting; its counter-bids are
    what the tit-for-tat agent reciprocates.
    """
    if variant not in TFT_VARIANTS:
        raise ContractViolation(f"variant must be one of {TFT_VARIANTS}")
    spec = f"tft(delta={delta})" if variant == "relative" else f"bayes_tft(delta={delta})"
    cfg = dataclasses.replace(config, opponent=spec, train_accept=True, train_offer=True)
    m = cfg.scenario.issue_count
    rng = init_rng(cfg.seed)
    nets = {"A_accept": _accept_net(cfg, m + 1, rng), "A_offer": _offer_net(cfg, m + 1, m, rng)}
    neural = NeuralAgent(nets["A_accept"], nets["A_offer"])
    return _run_loop(cfg, nets, {"A": neural, "B": None}, {"B": spec}, first_mover="B",
                     one_sided=True, out_dir=out_dir, overwrite=overwrite, resume=resume,
                     tag=f"tft_{variant}")


def self_play_scenario(mode: str) -> Scenario:
    if mode == "minigame_bargain":
        return Scenario((1.0,), (1.0,), discount=0.9, deadline=20)
    if mode == "minigame_centipede":
        return Scenario((1.0,), (1.0,), discount=1.3, deadline=20, growth=True)
    if mode == "multivariate":
        return Scenario(discount=0.95)
    raise ContractViolation(f"mode must be one of {SELF_PLAY_MODES}")


def train_self_play(config: TrainConfig, mode: str, out_dir=None, overwrite: bool = False,
                    resume=None, use_default_scenario: bool = True) -> TrainResult:
    """Two independently initialised players learn against each other.

    Mini-game modes give both players an Accept Net and a two-action
    categorical offer policy and play the full alternating protocol. The
    multivariate mode pits an Offer Net (P1, proposing every round) against an
    Accept Net (P2, the only one who can end the game).
    """
    if mode not in SELF_PLAY_MODES:
        raise ContractViolation(f"mode must be one of {SELF_PLAY_MODES}")
    cfg = config
    if use_default_scenario:
        cfg = dataclasses.replace(config, scenario=self_play_scenario(mode))
    rng = init_rng(cfg.seed)
    m = cfg.scenario.issue_count
    if mode.startswith("minigame"):
        if m != 1:
            raise ContractViolation("mini-games are univariate")
        nets = {}
        players = {}
        for p in PLAYERS:
            nets[f"{p}_accept"] = _accept_net(cfg, 2, rng)
            nets[f"{p}_offer"] = _accept_net(cfg, 2, rng)
            players[p] = NeuralAgent(nets[f"{p}_accept"], nets[f"{p}_offer"],
                                     action_set=MINI_GAME_ACTIONS.offers)
        return _run_loop(cfg, nets, players, {}, first_mover="A", one_sided=False,
                         out_dir=out_dir, overwrite=overwrite, resume=resume, tag=mode)
    nets = {"A_offer": _offer_net(cfg, m + 1, m, rng), "B_accept": _accept_net(cfg, m + 1, rng)}
    players = {"A": NeuralAgent(None, nets["A_offer"]), "B": NeuralAgent(nets["B_accept"], None)}
    return _run_loop(cfg, nets, players, {}, first_mover="A", one_sided=True,
                     out_dir=out_dir, overwrite=overwrite, resume=resume, tag=mode)


# -- frozen-policy evaluation -----------------------------------------------------

def play_games(nets: dict, opponent: str, scenario: Scenario, n_games: int, seed: int = 0,
               K: float = DEFAULT_K, greedy: bool = False, first_mover: Optional[str] = None,
               one_sided: Optional[bool] = None) -> list:
    """Play frozen nets (keys ``A_accept``/``A_offer``) against ``opponent``.

    Role selection mirrors :func:`train_vs_opponent` unless overridden.
    """
    acc, off = nets.get("A_accept"), nets.get("A_offer")
    if acc is None and off is None:
        raise ContractViolation("need at least one network to play")
    if first_mover is None or one_sided is None:
        if acc is not None and off is not None:
            fm, os_ = "A", False
        elif acc is not None:
            fm, os_ = "B", True
        else:
            fm, os_ = "A", True
        first_mover = fm if first_mover is None else first_mover
        one_sided = os_ if one_sided is None else one_sided
    neural = NeuralAgent(acc, off, greedy=greedy, record=False)
    reward_fn = penalty_rewards(K)
    out = []
    for g in range(n_games):
        tr = run_negotiation(neural, make_agent(opponent), scenario,
                             np.random.SeedSequence(seed, spawn_key=(2, g)),
                             first_mover=first_mover, one_sided=one_sided,
                             rewards=reward_fn, game_id=g)
        out.append(tr)
    return out
