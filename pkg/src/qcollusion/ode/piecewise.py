"""Fixed-step integration of piecewise-smooth systems with linear switching surfaces.

A system is a list of hyperplanes ``h_i(x) = n_i . x + c_i`` and a vector
field ``field(x, sides)`` where ``sides[i]`` is +1 when ``h_i(x) > 0`` and -1
otherwise. Between switches the field is smooth and integrated with RK4.
Crossings are localized by bisection on the step length. When the fields on
the two sides of a surface both point into it, the state slides along the
surface with the Filippov convex combination of the two fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Sides = tuple[int, ...]
Field = Callable[[np.ndarray, Sides], np.ndarray]

HORIZON = "horizon"
CONVERGED = "converged"
SLIDING_ENTERED = "sliding-entered"
CODIM2_ABORT = "codim2-abort"


@dataclass(frozen=True)
class Surface:
    normal: np.ndarray
    offset: float = 0.0

    def value(self, x: np.ndarray) -> float:
        return float(np.dot(self.normal, x) + self.offset)

    def project(self, x: np.ndarray) -> np.ndarray:
        n = self.normal
        return x - (self.value(x) / float(np.dot(n, n))) * n


@dataclass(frozen=True)
class PiecewiseSystem:
    surfaces: Sequence[Surface]
    field: Field

    def sides(self, x: np.ndarray) -> Sides:
        return tuple(1 if s.value(x) > 0 else -1 for s in self.surfaces)


@dataclass(frozen=True)
class SlidingCombination:
    """Convex combination of the two one-sided fields at a surface.

    ``tau`` weights the field on the positive side. ``feasible`` means
    ``tau`` lies in [0, 1]; ``attracting`` means both fields point into the
    surface, which is when a trajectory actually slides.
    """

    surface: int
    tau: float
    vector: np.ndarray
    normal_plus: float
    normal_minus: float

    @property
    def feasible(self) -> bool:
        return bool(np.isfinite(self.tau) and 0.0 <= self.tau <= 1.0)

    @property
    def attracting(self) -> bool:
        return self.normal_plus < 0.0 < self.normal_minus


def _with_side(sides: Sides, i: int, s: int) -> Sides:
    return sides[:i] + (s,) + sides[i + 1:]


def sliding_combination(system: PiecewiseSystem, x: np.ndarray, i: int, sides: Sides) -> SlidingCombination:
    n = system.surfaces[i].normal
    f_plus = system.field(x, _with_side(sides, i, 1))
    f_minus = system.field(x, _with_side(sides, i, -1))
    a, b = float(np.dot(n, f_plus)), float(np.dot(n, f_minus))
    if a == b:
        return SlidingCombination(i, float("nan"), np.full_like(x, np.nan), a, b)
    tau = b / (b - a)
    vec = tau * f_plus + (1.0 - tau) * f_minus
    # remove the rounding residue of the normal component
    vec = vec - (float(np.dot(n, vec)) / float(np.dot(n, n))) * n
    return SlidingCombination(i, tau, vec, a, b)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    sliding: np.ndarray  # surface index being slid on, -1 when off all surfaces
    reason: str
    sides: list[Sides] = field(default_factory=list, repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def _rk4(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_piecewise(
    system: PiecewiseSystem,
    x0: Sequence[float],
    t_end: float,
    step: float,
    *,
    event_tol: float = 1e-9,
    conv_tol: float = 1e-10,
    stop_on_sliding: bool = False,
) -> Trajectory:
    """Integrate from ``x0`` until ``t_end``, convergence, or a codimension-2 contact.

    Convergence means the active field (smooth or sliding) has norm below
    ``conv_tol``. Leaving a sliding surface is resolved to one step.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite initial state {x0!r}")
    surfaces = system.surfaces
    sides = system.sides(x)
    mode = -1
    t = 0.0
    ts, xs, modes, side_log = [t], [x.copy()], [mode], [sides]
    reason = HORIZON

    def active(m: int, sd: Sides) -> Callable[[np.ndarray], np.ndarray]:
        if m < 0:
            return lambda y: system.field(y, sd)
        return lambda y: sliding_combination(system, y, m, sd).vector

    def advance(f, m: int, y: np.ndarray, h: float) -> np.ndarray:
        out = _rk4(f, y, h)
        return surfaces[m].project(out) if m >= 0 else out

    def arrive(y: np.ndarray, i: int, sd: Sides, came_from: int) -> tuple[int, Sides]:
        """Decide between sliding on and crossing surface ``i`` at ``y``."""
        comb = sliding_combination(system, y, i, sd)
        if comb.attracting:
            return i, sd
        a, b = comb.normal_plus, comb.normal_minus
        if a > 0 and b > 0:
            new = 1
        elif a < 0 and b < 0:
            new = -1
        else:
            new = -came_from
        return -1, _with_side(sd, i, new)

    # a start exactly on a surface is treated as an arrival there
    on = [i for i, s in enumerate(surfaces) if abs(s.value(x)) < event_tol]
    if len(on) > 1:
        return Trajectory(np.array(ts), np.array(xs), np.array(modes), CODIM2_ABORT, side_log)
    if on:
        mode, sides = arrive(surfaces[on[0]].project(x), on[0], sides, sides[on[0]])
        if mode >= 0:
            x = surfaces[mode].project(x)

    while t < t_end:
        if mode >= 0:
            comb = sliding_combination(system, x, mode, sides)
            if not comb.attracting:
                a, b = comb.normal_plus, comb.normal_minus
                new = 1 if (a >= 0 and (b > 0 or a >= -b)) else -1
                sides = _with_side(sides, mode, new)
                mode = -1
        f = active(mode, sides)
        if float(np.linalg.norm(f(x))) < conv_tol:
            reason = CONVERGED
            break
        h = min(step, t_end - t)
        y = advance(f, mode, x, h)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"state became non-finite at t={t + h}")
        others = [i for i in range(len(surfaces)) if i != mode]
        crossed = [i for i in others if (1 if surfaces[i].value(y) > 0 else -1) != sides[i]]
        if not crossed:
            t += h
            x = y
        else:
            lo, hi, y_hi = 0.0, h, y
            for _ in range(200):
                hit = [i for i in crossed if abs(surfaces[i].value(y_hi)) < event_tol]
                if hit or hi - lo <= 1e-15 * max(1.0, t):
                    break
                mid = 0.5 * (lo + hi)
                y_mid = advance(f, mode, x, mid)
                if any((1 if surfaces[i].value(y_mid) > 0 else -1) != sides[i] for i in crossed):
                    hi, y_hi = mid, y_mid
                else:
                    lo = mid
            t += hi
            x = y_hi
            touching = [i for i in others if abs(surfaces[i].value(x)) < event_tol
                        or (1 if surfaces[i].value(x) > 0 else -1) != sides[i]]
            if len(touching) > 1 or (touching and mode >= 0):
                ts.append(t); xs.append(x.copy()); modes.append(mode); side_log.append(sides)
                reason = CODIM2_ABORT
                break
            i = touching[0]
            x = surfaces[i].project(x)
            mode, sides = arrive(x, i, sides, sides[i])
            if mode >= 0 and stop_on_sliding:
                ts.append(t); xs.append(x.copy()); modes.append(mode); side_log.append(sides)
                reason = SLIDING_ENTERED
                break
        ts.append(t); xs.append(x.copy()); modes.append(mode); side_log.append(sides)
    return Trajectory(np.array(ts), np.array(xs), np.array(modes), reason, side_log)
