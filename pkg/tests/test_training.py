import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from negotiation_rl.agents import AcceptAll, FixedOffer, make_agent
from negotiation_rl.neural import AdamState
from negotiation_rl.neural.checkpoint import load_checkpoint
from negotiation_rl.neural.distributions import softmax_policy
from negotiation_rl.neural.nets import AcceptNet, OfferNet
from negotiation_rl.protocol import ContractViolation, Scenario, run_negotiation
from negotiation_rl.training import (MINI_GAME_ACTIONS, EpisodeBuffer, NeuralAgent, TrainConfig,
                                     accept_net_update, assign_rewards, observation,
                                     offer_net_update, penalty_rewards, play_games,
                                     self_play_scenario, train_self_play, train_vs_opponent,
                                     train_vs_tft)
from negotiation_rl.training import loops
from negotiation_rl.training.updates import DivergenceError, offer_net_gradients

SMALL = dict(accept_hidden=16, offer_hidden=16, head_hidden=8)


def small(**kw):
    base = dict(epochs=20, opponent="time(c=1)", seed=0, **SMALL)
    base.update(kw)
    return TrainConfig(**base)


# -- rewards & buffer ---------------------------------------------------------------

def test_conflict_reward():
    tr = run_negotiation(FixedOffer((1, 1, 1)), FixedOffer((1, 1, 1)), Scenario(), 0)
    assert assign_rewards(tr, Scenario()) == (-1.0, -1.0)
    assert assign_rewards(tr, Scenario(), K=2.5) == (-2.5, -2.5)


def test_accept_reward_hand_values():
    # B proposes keeping (1, 0.5, 0), so A receives (0, 0.5, 1): worth 4 to A.
    tr = run_negotiation(AcceptAll(), FixedOffer((1, 0.5, 0)), Scenario(), 0, first_mover="B")
    assert assign_rewards(tr, Scenario())[0] == pytest.approx(4.0)


def test_accept_reward_discounted_at_round_three():
    class LateAccept(AcceptAll):
        def decide(self, offer, round):
            return round == 3
    s = Scenario(discount=0.9)
    tr = run_negotiation(FixedOffer((0, 0.5, 1)), LateAccept(), s, 0, first_mover="A",
                         one_sided=True)
    assert tr.end_round == 3
    assert assign_rewards(tr, s) == pytest.approx((4 * 0.81, 4 * 0.81))


@given(st.integers(0, 5000), st.sampled_from(["time(c=0.5)", "random", "tft()", "bayes_tft()"]))
def test_reward_bounds(seed, spec):
    tr = run_negotiation(make_agent("random"), make_agent(spec), Scenario(discount=0.95), seed,
                         rewards=penalty_rewards(1.0))
    for r in tr.final_rewards:
        assert -1.0 <= r <= 6.0


def test_buffer_terminal_bookkeeping():
    buf = EpisodeBuffer()
    buf.close(1.0)  # empty episodes are a no-op
    for i in range(3):
        buf.add(np.zeros(4), i % 2, -0.7, 0.1)
    assert not buf.closed
    buf.close(2.5)
    assert buf.closed
    assert [r.terminal for r in buf.records] == [False, False, True]
    np.testing.assert_array_equal(buf.rewards(), [2.5] * 3)
    with pytest.raises(ContractViolation):
        buf.add(np.zeros(4), 0, 0.0, 0.0)
    with pytest.raises(ContractViolation):
        buf.close(1.0)


def test_observation_layout():
    np.testing.assert_allclose(observation((0.2, 0.4, 0.6), 11, 20), [0.2, 0.4, 0.6, 0.5])


# -- updates ---------------------------------------------------------------------------

def _zero_head_accept_net(rng):
    net = AcceptNet(4, 8, 2, rng)
    for s in (net.actor, net.value):
        for w in s.weights:
            w[:] = 0.0
    return net


def test_accept_update_hand_example(rng):
    net = _zero_head_accept_net(rng)  # equal logits, value 0
    buf = EpisodeBuffer()
    buf.add(np.array([0.1, 0.2, 0.3, 0.0]), 0, math.log(0.5), 0.0)
    buf.close(1.0)
    losses = accept_net_update(buf, net, AdamState.for_params(net.parameters(), 1e-3))
    assert losses.critic == pytest.approx(1.0)
    assert losses.actor == pytest.approx(math.log(2))


def test_zero_td_leaves_parameters(rng):
    net = AcceptNet(4, 8, 2, rng)
    state = np.array([[0.5, 0.5, 0.5, 0.25]])
    q = float(net.forward(state)[1][0])
    buf = EpisodeBuffer()
    buf.add(state[0], 1, 0.0, q)
    buf.close(q)
    before = {k: v.copy() for k, v in net.parameters().items()}
    losses = accept_net_update(buf, net, AdamState.for_params(net.parameters(), 1e-2))
    assert losses.critic == 0 and losses.actor == 0
    for k, v in net.parameters().items():
        np.testing.assert_array_equal(v, before[k])


def test_offer_zero_td_zero_actor_loss(rng):
    net = OfferNet(4, "normal", hidden=8, head_hidden=4, value_hidden=4, rng=rng)
    s = rng.random((3, 4))
    params, values, _ = net.forward(s)
    grads, losses = offer_net_gradients(net, s, params.first, values)
    assert losses.actor == 0 and losses.critic == 0
    assert all(np.all(g == 0) for g in grads.values())


def test_update_rejects_empty_buffer(rng):
    with pytest.raises(ContractViolation):
        accept_net_update(EpisodeBuffer(), AcceptNet(4, 8, 2, rng), AdamState(1e-3))
    with pytest.raises(ContractViolation):
        offer_net_update(EpisodeBuffer(), OfferNet(4, hidden=8, rng=rng), AdamState(1e-3))


def test_nonfinite_reward_diverges(rng):
    net = AcceptNet(4, 8, 2, rng)
    buf = EpisodeBuffer()
    buf.add(np.zeros(4), 0, 0.0, 0.0)
    buf.close(float("nan"))
    with pytest.raises(DivergenceError):
        accept_net_update(buf, net, AdamState(1e-3))


def _positive_td_sigma(form, epochs=300):
    """Mean scale after repeated updates whose reward always beats the critic."""
    rng = np.random.default_rng(0)
    net = OfferNet(4, "normal", hidden=16, head_hidden=8, value_hidden=8, rng=rng)
    adam = AdamState.for_params(net.parameters(), 1e-3)
    s = np.array([[0.5, 0.5, 0.5, 0.0]])
    sig = []
    for _ in range(epochs):
        params, value, _ = net.forward(s)
        a = params.first + params.second * rng.standard_normal(params.first.shape)
        buf = EpisodeBuffer()
        buf.add(s[0], a[0], 0.0, value[0])
        buf.close(float(value[0]) + 1.0)  # TD = +1 every episode
        sig.append(offer_net_update(buf, net, adam, form).mean_sigma)
    return np.mean(sig[:50]), np.mean(sig[-50:])


def test_positive_td_entropy_bonus_widens_scale():
    # With TD > 0 the update ascends log-density + entropy; the entropy bonus
    # grows with sigma, so the scale widens rather than narrows.
    first, last = _positive_td_sigma("paper")
    assert last > first


# -- loops --------------------------------------------------------------------------

def test_learning_rate_zero_keeps_policies():
    cfg = small(epochs=100, learning_rate=0.0, train_offer=True)
    ref = train_vs_opponent(dataclasses.replace(cfg, epochs=0))
    res = train_vs_opponent(cfg)
    assert len(res.metrics) == 100
    for name, net in res.nets.items():
        for k, v in net.parameters().items():
            np.testing.assert_array_equal(v, ref.nets[name].parameters()[k])


def test_training_is_deterministic(tmp_path):
    cfg = small(epochs=15, train_offer=True, checkpoint_every=5)
    a = train_vs_opponent(cfg, tmp_path / "a")
    b = train_vs_opponent(cfg, tmp_path / "b")
    assert a.metrics == b.metrics
    for name in ("metrics.csv", "outcomes.csv", "checkpoints/final.ckpt",
                 "checkpoints/epoch_000009.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_resume_matches_uninterrupted(tmp_path):
    cfg = small(epochs=12)
    full = train_vs_opponent(cfg)
    half = train_vs_opponent(dataclasses.replace(cfg, epochs=6), tmp_path / "h")
    rest = train_vs_opponent(cfg, resume=half.checkpoints[-1])
    assert half.metrics + rest.metrics == full.metrics


def test_resume_architecture_mismatch(tmp_path):
    res = train_vs_opponent(small(epochs=2), tmp_path / "x")
    with pytest.raises(ContractViolation):
        train_vs_opponent(small(epochs=4, accept_hidden=8), resume=res.checkpoints[-1])
    with pytest.raises(ContractViolation):
        train_vs_opponent(small(epochs=4, train_offer=True), resume=res.checkpoints[-1])


def test_metrics_and_outcomes_schema(tmp_path):
    res = train_vs_opponent(small(epochs=5), tmp_path)
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "# schema: negotiation-metrics/1"
    assert lines[1].split(",") == loops.METRICS_COLUMNS
    assert len(lines) == 2 + 5
    assert (tmp_path / "outcomes.csv").read_text().startswith("# schema: negotiation-outcomes/1")
    assert all(row[3] >= 1 for row in res.metrics)


def test_early_stopping_threshold():
    # Hardliner never accepts the neural agent; every accept-only game runs to the
    # deadline unless the agent accepts, so compare thresholds on identical runs.
    base = small(epochs=40, opponent="hardliner", early_stop_window=10)
    never = train_vs_opponent(dataclasses.replace(base, early_stop_threshold=0.0))
    assert never.stopped_at is None and len(never.metrics) == 40
    times = never.column("playout_time")
    stds = [np.std(times[i - 9:i + 1]) for i in range(9, 40)]
    thr = float(np.median(stds)) + 1e-9
    stop = train_vs_opponent(dataclasses.replace(base, early_stop_threshold=thr))
    first = next(i + 9 for i, s in enumerate(stds) if s < thr)
    assert stop.stopped_at == first and len(stop.metrics) == first + 1


def test_divergence_halts_with_checkpoint(tmp_path, monkeypatch):
    real = loops.accept_net_update
    calls = {"n": 0}

    def flaky(buf, net, adam):
        calls["n"] += 1
        if calls["n"] == 4:
            raise DivergenceError("synthetic NaN")
        return real(buf, net, adam)

    monkeypatch.setattr(loops, "accept_net_update", flaky)
    res = train_vs_opponent(small(epochs=10), tmp_path)
    assert res.halted
    assert len(res.metrics) == 3
    nets, _, header = load_checkpoint(tmp_path / "checkpoints" / "final.ckpt")
    assert header["meta"]["epoch"] == 2
    for k, v in nets["A_accept"].parameters().items():
        assert np.all(np.isfinite(v))


def test_config_validation():
    with pytest.raises(ContractViolation):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ContractViolation):
        TrainConfig(head_kind="gamma")
    with pytest.raises(ContractViolation):
        train_vs_opponent(TrainConfig())
    with pytest.raises(ContractViolation):
        train_vs_opponent(small(train_accept=False, train_offer=False))
    with pytest.raises(ValueError):
        train_vs_opponent(small(opponent="wizard"))


def test_roles_accept_only_and_offer_only():
    acc = train_vs_opponent(small(epochs=3))
    assert set(acc.nets) == {"A_accept"}
    off = train_vs_opponent(small(epochs=3, train_accept=False, train_offer=True))
    assert set(off.nets) == {"A_offer"}
    assert all(not math.isnan(r[6]) for r in off.metrics)


def test_minigame_self_play_distributions():
    cfg = small(epochs=30, learning_rate=1e-3)
    res = train_self_play(cfg, "minigame_centipede")
    assert set(res.nets) == {"A_accept", "A_offer", "B_accept", "B_offer"}
    grid = np.array([[x, t] for x in (0.1, 0.5) for t in np.linspace(0, 0.95, 5)])
    for net in res.nets.values():
        p = softmax_policy(net.forward(grid)[0])
        assert np.all(p >= 0) and np.allclose(p.sum(axis=1), 1, atol=1e-12)
    np.testing.assert_array_equal(MINI_GAME_ACTIONS.offers, [[0.9], [0.5]])


def test_self_play_scenarios():
    assert self_play_scenario("minigame_bargain").discount == 0.9
    c = self_play_scenario("minigame_centipede")
    assert c.discount == 1.3 and c.growth
    assert self_play_scenario("multivariate").discount == 0.95
    with pytest.raises(ContractViolation):
        self_play_scenario("chess")
    res = train_self_play(small(epochs=3), "multivariate")
    assert set(res.nets) == {"A_offer", "B_accept"}


def test_tft_training_runs():
    res = train_vs_tft(small(epochs=3), "bayesian")
    assert set(res.nets) == {"A_accept", "A_offer"}
    with pytest.raises(ContractViolation):
        train_vs_tft(small(epochs=1), "cosmic")


def test_play_games_is_frozen_and_seeded():
    res = train_vs_opponent(small(epochs=5, train_offer=True))
    before = {k: v.copy() for k, v in res.nets["A_accept"].parameters().items()}
    a = play_games(res.nets, "time(c=1)", Scenario(), 5, seed=3)
    b = play_games(res.nets, "time(c=1)", Scenario(), 5, seed=3)
    assert [t.events for t in a] == [t.events for t in b]
    for k, v in res.nets["A_accept"].parameters().items():
        np.testing.assert_array_equal(v, before[k])
    with pytest.raises(ContractViolation):
        play_games({}, "random", Scenario(), 1)


def test_neural_agent_without_nets():
    agent = NeuralAgent()
    tr = run_negotiation(agent, FixedOffer((1, 1, 1)), Scenario(deadline=3), 0)
    assert not tr.accepted
    assert all(e.shares == (1.0, 1.0, 1.0) for e in tr.offers("A"))
