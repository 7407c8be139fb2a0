"""Stateless Q-learning agent: action selection, asynchronous update, initial conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .game import Action, StageGame


@dataclass(frozen=True)
class QPair:
    q_c: float
    q_d: float

    def __getitem__(self, action: Action) -> float:
        return self.q_c if Action(action) is Action.C else self.q_d

    def greedy(self) -> Action | None:
        """Preferred action, or None on an exact tie."""
        if self.q_c > self.q_d:
            return Action.C
        if self.q_d > self.q_c:
            return Action.D
        return None


@dataclass(frozen=True)
class AgentParams:
    alpha: float
    gamma: float
    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"learning rate must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"exploration rate must lie in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class Intervals:
    i_c: tuple[float, float]
    i_d: tuple[float, float]

    def __getitem__(self, action: Action) -> tuple[float, float]:
        return self.i_c if Action(action) is Action.C else self.i_d

    def contains(self, q: QPair, slack: float = 0.0) -> bool:
        return (
            self.i_c[0] - slack <= q.q_c <= self.i_c[1] + slack
            and self.i_d[0] - slack <= q.q_d <= self.i_d[1] + slack
        )


class Policy(Protocol):
    """Maps a Q-pair to an action; extension point for other exploration rules."""

    def select(self, q: QPair, rng: np.random.Generator) -> Action: ...


def _coin(rng: np.random.Generator) -> Action:
    return Action.C if rng.random() < 0.5 else Action.D


def select_action(q: QPair, epsilon: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy choice.

    Draw order is part of the contract (the compiled simulator kernel
    consumes the stream identically): one uniform for the explore test, then
    one more uniform only if exploring or if the greedy choice is a tie.
    """
    if rng.random() < epsilon:
        return _coin(rng)
    greedy = q.greedy()
    return _coin(rng) if greedy is None else greedy


@dataclass(frozen=True)
class EpsilonGreedy:
    epsilon: float

    def select(self, q: QPair, rng: np.random.Generator) -> Action:
        return select_action(q, self.epsilon, rng)


@dataclass(frozen=True)
class Greedy:
    def select(self, q: QPair, rng: np.random.Generator) -> Action:
        return select_action(q, 0.0, rng)


def update(q: QPair, played: Action, reward: float, params: AgentParams) -> QPair:
    # the max reads the pre-update pair
    target = reward + params.gamma * max(q.q_c, q.q_d)
    if Action(played) is Action.C:
        return QPair((1.0 - params.alpha) * q.q_c + params.alpha * target, q.q_d)
    return QPair(q.q_c, (1.0 - params.alpha) * q.q_d + params.alpha * target)


def intervals(g: float, gamma: float) -> Intervals:
    """Ranges a greedy action's Q-value settles in against an opponent playing D..C."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {gamma}")
    pay = StageGame(g).matrix()
    scale = 1.0 / (1.0 - gamma)
    return Intervals(
        i_c=(pay[Action.C][Action.D] * scale, pay[Action.C][Action.C] * scale),
        i_d=(pay[Action.D][Action.D] * scale, pay[Action.D][Action.C] * scale),
    )


def sample_initial(g: float, gamma: float, rng: np.random.Generator) -> QPair:
    iv = intervals(g, gamma)
    q_c = iv.i_c[0] + (iv.i_c[1] - iv.i_c[0]) * rng.random()
    q_d = iv.i_d[0] + (iv.i_d[1] - iv.i_d[0]) * rng.random()
    return QPair(q_c, q_d)
