"""The one-parameter prisoner's dilemma and the payoffs of the designing game."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping


class Action(enum.IntEnum):
    C = 0
    D = 1

    @property
    def other(self) -> "Action":
        return Action(1 - self)


class Player(str, enum.Enum):
    A = "A"
    B = "B"

    @property
    def other(self) -> "Player":
        return Player.B if self is Player.A else Player.A


class Region(enum.IntEnum):
    """Quarter of Q-space; first letter is A's preferred action, second is B's."""

    CC = 0
    CD = 1
    DC = 2
    DD = 3

    @classmethod
    def of(cls, a: Action, b: Action) -> "Region":
        return cls(2 * int(a) + int(b))

    @property
    def actions(self) -> tuple[Action, Action]:
        return Action(int(self) // 2), Action(int(self) % 2)

    def transposed(self) -> "Region":
        a, b = self.actions
        return Region.of(b, a)


REGIONS = tuple(Region)


def _check_g(g: float) -> None:
    if not 1.0 <= g <= 2.0:
        raise ValueError(f"cooperation value g must lie in [1, 2], got {g}")


def _check_eps(*eps: float) -> None:
    for e in eps:
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"exploration rate must lie in [0, 1], got {e}")


@dataclass(frozen=True)
class StageGame:
    """Contribution game: each player invests 2 units or keeps them; the pool grows by g."""

    g: float

    def __post_init__(self) -> None:
        _check_g(self.g)

    def payoff(self, a: Action, b: Action) -> tuple[float, float]:
        g = self.g
        if a is Action.C and b is Action.C:
            return 2.0 * g, 2.0 * g
        if a is Action.C:
            return g, 2.0 + g
        if b is Action.C:
            return 2.0 + g, g
        return 2.0, 2.0

    def matrix(self) -> list[list[float]]:
        """Row player's payoffs indexed ``[own action][opponent action]``."""
        return [[self.payoff(Action(i), Action(j))[0] for j in range(2)] for i in range(2)]


def stage_payoff(g: float, a: Action, b: Action) -> tuple[float, float]:
    return StageGame(g).payoff(Action(a), Action(b))


def zone_payoff(
    g: float, eps_a: float, eps_b: float, region: Region, player: Player | str = Player.A
) -> float:
    """Expected per-period payoff while the Q-state stays in ``region``.

    Each player plays its greedy action with probability ``1 - eps/2``.
    """
    _check_eps(eps_a, eps_b)
    player = Player(player)
    if player is Player.B:
        return zone_payoff(g, eps_b, eps_a, Region(region).transposed(), Player.A)
    game = StageGame(g)
    x, y = Region(region).actions
    total = 0.0
    for a, pa in ((x, 1.0 - eps_a / 2.0), (x.other, eps_a / 2.0)):
        for b, pb in ((y, 1.0 - eps_b / 2.0), (y.other, eps_b / 2.0)):
            total += pa * pb * game.payoff(a, b)[0]
    return total


def _tau_vector(tau: Mapping[Region | str, float] | tuple | list) -> list[float]:
    if isinstance(tau, Mapping):
        out = [0.0] * 4
        for key, val in tau.items():
            r = Region[key] if isinstance(key, str) else Region(key)
            out[r] = float(val)
        return out
    out = [float(t) for t in tau]
    if len(out) != 4:
        raise ValueError("tau must have one entry per region (CC, CD, DC, DD)")
    return out


def designer_payoff(
    tau, g: float, eps_a: float, eps_b: float, player: Player | str = Player.A
) -> float:
    """Long-run payoff of a designer given occupancy fractions per region.

    ``tau`` is either a mapping Region -> fraction or a sequence ordered
    (CC, CD, DC, DD).
    """
    t = _tau_vector(tau)
    if any(v < 0 for v in t):
        raise ValueError(f"occupancy fractions must be non-negative: {t}")
    if abs(sum(t) - 1.0) > 1e-9:
        raise ValueError(f"occupancy fractions must sum to 1, got {sum(t)!r}")
    return sum(t[r] * zone_payoff(g, eps_a, eps_b, r, player) for r in REGIONS)
