"""Per-episode storage of states, actions and the terminal reward."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..protocol import ContractViolation


@dataclass
class Record:
    state: np.ndarray
    action: object
    log_prob: float
    value: float
    reward: Optional[float] = None
    terminal: bool = False


@dataclass
class EpisodeBuffer:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def add(self, state, action, log_prob: float, value: float) -> None:
        if self.records and self.records[-1].terminal:
            raise ContractViolation("episode already closed")
        self.records.append(Record(np.asarray(state, float), action, float(log_prob), float(value)))

    def close(self, reward: float) -> None:
        """Mark the last record terminal; every record is scored with ``reward``.

        Returns are Monte Carlo: with terminal-only rewards and no bootstrapping
        each step's target is the episode's final reward.
        """
        if not self.records:
            return
        if self.records[-1].terminal:
            raise ContractViolation("episode already closed")
        for r in self.records:
            r.reward = float(reward)
        self.records[-1].terminal = True

    @property
    def closed(self) -> bool:
        return bool(self.records) and self.records[-1].terminal

    def states(self) -> np.ndarray:
        return np.vstack([r.state for r in self.records])

    def actions(self) -> np.ndarray:
        return np.asarray([r.action for r in self.records])

    def rewards(self) -> np.ndarray:
        return np.asarray([r.reward for r in self.records], float)

    def clear(self) -> None:
        self.records.clear()
