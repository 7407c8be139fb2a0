"""Continuous-time approximation of the two-learner process.

Time is measured in discrete steps: the flow equals the expected one-step
increment of the stochastic process, with the learning rate kept inside.
State layout matches the simulator, ``[Q_A^C, Q_A^D, Q_B^C, Q_B^D]``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..game import Action, Player, Region, stage_payoff
from ..simulator.core import ModelParams, classify
from . import piecewise as pw

BOUNDARY_A = pw.Surface(np.array([1.0, -1.0, 0.0, 0.0]))
BOUNDARY_B = pw.Surface(np.array([0.0, 0.0, 1.0, -1.0]))


def symmetric_threshold(g: float) -> float:
    """Largest common exploration rate at which a symmetric pseudo steady-state exists."""
    if not 1.0 <= g <= 2.0:
        raise ValueError(f"g must lie in [1, 2], got {g}")
    return 1.0 - float(np.sqrt((2.0 - g) / g))


def expected_payoff(g: float, own: Action, opp_greedy: Action, eps_opp: float) -> float:
    """Mean payoff of playing ``own`` against an opponent whose greedy action is ``opp_greedy``."""
    keep = 1.0 - eps_opp / 2.0
    return keep * stage_payoff(g, own, opp_greedy)[0] + (1.0 - keep) * stage_payoff(g, own, opp_greedy.other)[0]


def _player_field(qc: float, qd: float, own: Action, opp: Action, eps_own: float, eps_opp: float,
                  p: ModelParams) -> tuple[float, float]:
    greedy_rate = p.alpha * (1.0 - eps_own / 2.0)
    other_rate = p.alpha * eps_own / 2.0
    q_greedy, q_other = (qc, qd) if own is Action.C else (qd, qc)
    d_greedy = greedy_rate * (expected_payoff(p.g, own, opp, eps_opp) - (1.0 - p.gamma) * q_greedy)
    d_other = other_rate * (expected_payoff(p.g, own.other, opp, eps_opp) + p.gamma * q_greedy - q_other)
    return (d_greedy, d_other) if own is Action.C else (d_other, d_greedy)


def region_field(q, params: ModelParams, region: Region) -> np.ndarray:
    """Flow of ``region`` evaluated at ``q`` with no check that ``q`` lies in it."""
    a, b = Region(region).actions
    da = _player_field(q[0], q[1], a, b, params.eps_a, params.eps_b, params)
    db = _player_field(q[2], q[3], b, a, params.eps_b, params.eps_a, params)
    return np.array([da[0], da[1], db[0], db[1]])


def flow(q, params: ModelParams, region: Region | None = None) -> np.ndarray:
    """Time derivative of the state inside a region's open interior."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"state must be 4 finite values, got {q!r}")
    if q[0] == q[1] or q[2] == q[3]:
        raise ValueError("flow is undefined on a switching surface")
    actual = classify(q)
    if region is not None and Region(region) is not actual:
        raise ValueError(f"state lies in {actual.name}, not {Region(region).name}")
    return region_field(q, params, actual)


def affine_system(params: ModelParams, region: Region) -> tuple[np.ndarray, np.ndarray]:
    """``(M, c)`` with ``region_field(q) = M @ q + c``."""
    c = region_field(np.zeros(4), params, region)
    m = np.column_stack([region_field(e, params, region) - c for e in np.eye(4)])
    return m, c


def dd_steady_state(params: ModelParams) -> np.ndarray:
    """Closed-form zero of the all-defect flow."""
    out = []
    for eps_opp in (params.eps_b, params.eps_a):
        qd = (2.0 + eps_opp * params.g / 2.0) / (1.0 - params.gamma)
        qc = params.g * (1.0 + eps_opp / 2.0) + params.gamma * qd
        out += [qc, qd]
    return np.array(out)


def no_steady_state_residual(params: ModelParams, region: Region) -> tuple[np.ndarray, bool]:
    """Zero of the region's affine flow and whether it falls outside the region."""
    m, c = affine_system(params, region)
    if np.linalg.matrix_rank(m) < 4:
        raise np.linalg.LinAlgError(
            f"flow of {Region(region).name} has no isolated zero (an exploration rate is 0)")
    candidate = np.linalg.solve(m, -c)
    return candidate, classify(candidate) is not Region(region)


def _sides_to_region(sides: pw.Sides) -> Region:
    a = Action.C if sides[0] > 0 else Action.D
    b = Action.C if sides[1] > 0 else Action.D
    return Region.of(a, b)


def model_system(params: ModelParams) -> pw.PiecewiseSystem:
    """The 4-D flow as a piecewise system; surface 0 is A's indifference, 1 is B's."""
    maps = {r: affine_system(params, r) for r in Region}

    def f(x, sides):
        m, c = maps[_sides_to_region(sides)]
        return m @ x + c

    return pw.PiecewiseSystem(surfaces=(BOUNDARY_A, BOUNDARY_B), field=f)


def symmetric_system(params: ModelParams) -> pw.PiecewiseSystem:
    """Flow restricted to ``q_A = q_B`` with state ``(Q^C, Q^D)``; needs equal exploration rates."""
    if params.eps_a != params.eps_b:
        raise ValueError("the symmetric reduction needs eps_a == eps_b")

    maps = {}
    for side, region in ((1, Region.CC), (-1, Region.DD)):
        m, c = affine_system(params, region)
        # fold B's columns onto A's: q = (x, x)
        maps[side] = (m[:2, :2] + m[:2, 2:], c[:2])

    def f(x, sides):
        m, c = maps[sides[0]]
        return m @ x + c

    return pw.PiecewiseSystem(surfaces=(pw.Surface(np.array([1.0, -1.0])),), field=f)


@dataclass
class ModelTrajectory:
    t: np.ndarray
    q: np.ndarray  # (n, 4)
    regions: list[Region]
    sliding: np.ndarray  # -1 off the surfaces, else 0 for A's and 1 for B's indifference surface
    reason: str

    @property
    def final(self) -> np.ndarray:
        return self.q[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "qac", "qad", "qbc", "qbd", "region"])
        for t, q, r in zip(self.t, self.q, self.regions):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in q), r.name])
        return buf.getvalue()


def default_step(params: ModelParams) -> float:
    # a tenth of the 1/alpha time scale on which every flow component relaxes
    return 0.1 / params.alpha


def integrate(init, params: ModelParams, t_end: float = 1e5, step: float | None = None, **kw) -> ModelTrajectory:
    """Integrate the 4-D flow from ``init``, sliding on single indifference surfaces."""
    init = np.asarray(init, dtype=float)
    if init.shape != (4,):
        raise ValueError("initial state must have 4 components")
    step = default_step(params) if step is None else step
    tr = pw.integrate_piecewise(model_system(params), init, t_end, step, **kw)
    regions = [_sides_to_region(s) if m < 0 else classify(q) for s, m, q in zip(tr.sides, tr.sliding, tr.x)]
    return ModelTrajectory(tr.t, tr.x, regions, tr.sliding, tr.reason)


def integrate_symmetric(init, params: ModelParams, t_end: float = 1e5, step: float | None = None,
                        **kw) -> ModelTrajectory:
    """Integrate from a symmetric state on the invariant subspace ``q_A = q_B``.

    On that subspace both players switch together, so sliding happens on the
    single surface ``Q^C = Q^D`` of the reduced 2-D system.
    """
    init = np.asarray(init, dtype=float)
    if init.shape == (4,):
        if init[0] != init[2] or init[1] != init[3]:
            raise ValueError("initial state is not symmetric")
        init = init[:2]
    step = default_step(params) if step is None else step
    tr = pw.integrate_piecewise(symmetric_system(params), init, t_end, step, **kw)
    q = np.hstack([tr.x, tr.x])
    regions = [(Region.CC if s[0] > 0 else Region.DD) if m < 0 else classify(v)
               for s, m, v in zip(tr.sides, tr.sliding, q)]
    return ModelTrajectory(tr.t, q, regions, np.where(tr.sliding >= 0, 0, -1), tr.reason)


@dataclass(frozen=True)
class SlidingSolution:
    boundary: Player
    tau_star: float  # weight on the side where the player prefers C
    vector: np.ndarray
    attracting: bool

    @property
    def feasible(self) -> bool:
        return bool(np.isfinite(self.tau_star) and 0.0 <= self.tau_star <= 1.0)

    @property
    def pseudo_steady(self) -> bool:
        return self.feasible and float(np.linalg.norm(self.vector)) < 1e-9


def sliding(q, params: ModelParams, boundary: Player, tol: float = 1e-9) -> SlidingSolution:
    """Filippov combination on one player's indifference surface at ``q``."""
    q = np.asarray(q, dtype=float)
    i = 0 if Player(boundary) is Player.A else 1
    other = 1 - i
    surf = model_system(params).surfaces
    if abs(surf[i].value(q)) >= tol:
        raise ValueError(f"player {Player(boundary).value} is not indifferent at {q!r}")
    if abs(surf[other].value(q)) < tol:
        raise ValueError("both players are indifferent; no codimension-1 sliding exists here")
    q = surf[i].project(q)
    system = model_system(params)
    comb = pw.sliding_combination(system, q, i, system.sides(q))
    return SlidingSolution(Player(boundary), comb.tau, comb.vector, comb.attracting)


@dataclass(frozen=True)
class PseudoEquilibrium:
    q: float  # common value of Q^C = Q^D on the symmetric subspace
    tau_star: float  # fraction of time in the mutual-cooperation region
    attracting: bool  # both one-sided fields point into the diagonal
    stable: bool  # attracting and the sliding motion returns to it


def symmetric_pseudo_equilibria(params: ModelParams) -> list[PseudoEquilibrium]:
    """Zeros of the sliding vector on the symmetric diagonal ``Q^C = Q^D``.

    On the diagonal the two one-sided fields are affine in the common value,
    and the sliding vector vanishes exactly where they are antiparallel, which
    is a quadratic condition. Only roots with a weight in [0, 1] are kept;
    a repelling root (fields pointing away on both sides) is reported with
    ``attracting=False``.
    """
    system = symmetric_system(params)
    diag = lambda v: np.array([v, v])

    def cross(v):
        a, b = system.field(diag(v), (1,)), system.field(diag(v), (-1,))
        return float(a[0] * b[1] - a[1] * b[0])

    # cross(f_plus, f_minus) is quadratic in v: recover it from three samples
    vs = np.array([0.0, 1.0, 2.0])
    coef = np.polyfit(vs, [cross(v) for v in vs], 2)
    out = []
    for r in np.roots(coef):
        if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)):
            continue
        v = float(r.real)
        comb = pw.sliding_combination(system, diag(v), 0, (1,))
        if not comb.feasible:
            continue
        h = 1e-6 * max(1.0, abs(v))
        speed = lambda u: pw.sliding_combination(system, diag(u), 0, (1,)).vector[0]
        stable = comb.attracting and (speed(v + h) - speed(v - h)) < 0
        out.append(PseudoEquilibrium(v, comb.tau, comb.attracting, bool(stable)))
    return sorted(out, key=lambda e: e.q)
