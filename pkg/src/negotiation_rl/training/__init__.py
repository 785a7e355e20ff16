"""Actor-critic training loops, reward scheme and episode storage."""

from .agent import NeuralAgent, observation
from .buffer import EpisodeBuffer
from .loops import (MINI_GAME_ACTIONS, MiniGameActionSet, TrainConfig, TrainResult,
                    play_games, self_play_scenario, train_self_play, train_vs_opponent,
                    train_vs_tft)
from .rewards import assign_rewards, penalty_rewards
from .updates import DivergenceError, Losses, accept_net_update, offer_net_update

__all__ = [
    "DivergenceError", "EpisodeBuffer", "Losses", "MINI_GAME_ACTIONS", "MiniGameActionSet",
    "NeuralAgent", "TrainConfig", "TrainResult", "accept_net_update", "assign_rewards",
    "observation", "offer_net_update", "penalty_rewards", "play_games", "self_play_scenario",
    "train_self_play", "train_vs_opponent", "train_vs_tft",
]
