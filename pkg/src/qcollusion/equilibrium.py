"""Best responses, Nash points and Pareto profiles of the exploration-choice game."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import REGIONS, Player, zone_payoff
from .simulator.tables import TauRow, TauTable, key_of

FREQ_HEADER = ["g", "eps_lo", "eps_hi", "freq"]
Point = tuple[float, float]


@dataclass
class PayoffGrid:
    g: float
    eps_axis: np.ndarray
    payoff_a: np.ndarray  # [eps_a index, eps_b index]
    stderr_a: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.eps_axis = np.asarray(self.eps_axis, dtype=float)
        self.payoff_a = np.asarray(self.payoff_a, dtype=float)
        n = len(self.eps_axis)
        if self.payoff_a.shape != (n, n):
            raise ValueError(f"payoff matrix shape {self.payoff_a.shape} does not match axis length {n}")
        if n < 2 or np.any(np.diff(self.eps_axis) <= 0):
            raise ValueError("exploration axis must be strictly increasing with at least two values")

    def payoff(self, player: Player | str = Player.A) -> np.ndarray:
        """Payoff matrix of ``player`` indexed ``[eps_a index, eps_b index]``."""
        return self.payoff_a if Player(player) is Player.A else self.payoff_a.T

    def index(self, eps: float) -> int:
        i = int(np.argmin(np.abs(self.eps_axis - eps)))
        if abs(self.eps_axis[i] - eps) > 1e-9:
            raise KeyError(f"{eps} is not on the grid")
        return i


def _cell_payoff(row: TauRow, g: float) -> tuple[float, float | None]:
    z = np.array([zone_payoff(g, row.eps_a, row.eps_b, r, Player.A) for r in REGIONS])
    value = float(np.dot(row.tau, z))
    err = None
    if row.run_fractions is not None and len(row.run_fractions) > 1:
        per_run = row.run_fractions @ z
        err = float(per_run.std(ddof=1) / np.sqrt(len(per_run)))
    return value, err


def synthesize_payoffs(table: TauTable, g: float | None = None, eps_axis: Sequence[float] | None = None) -> PayoffGrid:
    """Designer payoffs of player A on the full (eps_a, eps_b) grid at one g."""
    gs = table.g_values()
    if g is None:
        if len(gs) != 1:
            raise ValueError(f"table holds several g values {gs}; pass g")
        g = gs[0]
    sl = table.slice_g(g)
    axis = np.array(sorted(eps_axis if eps_axis is not None else sl.eps_values()), dtype=float)
    n = len(axis)
    pay = np.empty((n, n))
    err = np.full((n, n), np.nan)
    missing = []
    for i, ea in enumerate(axis):
        for j, eb in enumerate(axis):
            if (g, ea, eb) not in sl:
                missing.append(key_of(g, ea, eb))
                continue
            pay[i, j], e = _cell_payoff(sl.lookup(g, ea, eb), g)
            if e is not None:
                err[i, j] = e
    if missing:
        raise KeyError(f"missing grid cells: {missing}")
    return PayoffGrid(float(g), axis, pay, None if np.all(np.isnan(err)) else err)


@dataclass
class BestResponse:
    """Best reply of ``player`` to each grid value of the opponent's exploration.

    Segment ``j`` covers ``[eps_axis[j], eps_axis[j+1]]`` and reads
    ``BR(e) = a * e + b``.
    """

    player: Player
    eps_axis: np.ndarray
    knots: np.ndarray
    segments: np.ndarray  # (n-1, 2) rows (a, b)

    def __call__(self, e: float) -> float:
        return float(np.interp(e, self.eps_axis, self.knots))

    def polyline(self) -> np.ndarray:
        """Vertices ``(eps_a, eps_b)`` of the curve in the profile plane."""
        if self.player is Player.A:
            return np.column_stack([self.knots, self.eps_axis])
        return np.column_stack([self.eps_axis, self.knots])


def best_response(grid: PayoffGrid, player: Player | str = Player.A) -> BestResponse:
    player = Player(player)
    # B's payoff is A's transposed, so both replies are column argmaxes of payoff_a;
    # argmax keeps the first, i.e. smallest-eps, tie
    idx = np.argmax(grid.payoff_a, axis=0)
    knots = grid.eps_axis[idx]
    e = grid.eps_axis
    a = np.diff(knots) / np.diff(e)
    b = knots[:-1] - a * e[:-1]
    return BestResponse(player, e.copy(), knots, np.column_stack([a, b]))


def _segment_intersections(p, p2, q, q2, tol: float) -> list[np.ndarray]:
    r = p2 - p
    s = q2 - q
    denom = r[0] * s[1] - r[1] * s[0]
    qp = q - p
    if abs(denom) > tol * max(1.0, float(np.linalg.norm(r) * np.linalg.norm(s))):
        t = (qp[0] * s[1] - qp[1] * s[0]) / denom
        u = (qp[0] * r[1] - qp[1] * r[0]) / denom
        if -tol <= t <= 1 + tol and -tol <= u <= 1 + tol:
            return [p + min(max(t, 0.0), 1.0) * r]
        return []
    # parallel: only collinear overlaps count
    if abs(qp[0] * r[1] - qp[1] * r[0]) > tol * max(1.0, float(np.linalg.norm(r))):
        return []
    rr = float(np.dot(r, r))
    if rr == 0.0:
        ss = float(np.dot(s, s))
        if ss == 0.0:
            return [p.copy()] if np.linalg.norm(p - q) <= tol else []
        u = float(np.dot(p - q, s)) / ss
        return [p.copy()] if -tol <= u <= 1 + tol and np.linalg.norm(q + u * s - p) <= tol else []
    t0 = float(np.dot(q - p, r)) / rr
    t1 = float(np.dot(q2 - p, r)) / rr
    lo, hi = max(0.0, min(t0, t1)), min(1.0, max(t0, t1))
    if lo > hi + tol:
        return []
    return [p + lo * r, p + hi * r]


@dataclass
class EquilibriumSet:
    g: float
    nash: list[Point]
    pareto: list[Point] = field(default_factory=list)

    def symmetric(self, tol: float = 1e-9) -> list[bool]:
        return [abs(x - y) <= tol for x, y in self.nash]

    def to_records(self) -> list[dict]:
        out = [{"g": self.g, "eps_a": x, "eps_b": y, "kind": "nash", "symmetric": s}
               for (x, y), s in zip(self.nash, self.symmetric())]
        out += [{"g": self.g, "eps_a": x, "eps_b": y, "kind": "pareto", "symmetric": abs(x - y) <= 1e-9}
                for x, y in self.pareto]
        return out


def _dedup(points: list[np.ndarray], radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in sorted(points, key=lambda v: (round(float(v[0]), 12), round(float(v[1]), 12))):
        if all(np.linalg.norm(p - k) > radius for k in kept):
            kept.append(p)
    return kept


def nash_equilibria(br: BestResponse, tol: float = 1e-9, dedup: float | None = None) -> list[Point]:
    """Crossings of the best-response curve with its mirror across the diagonal.

    Points closer than ``dedup`` (default half a grid cell) are merged; the
    set is closed under swapping the two coordinates.
    """
    curve = np.column_stack([br.knots, br.eps_axis])
    mirror = curve[:, ::-1]
    if dedup is None:
        dedup = 0.5 * float(np.min(np.diff(br.eps_axis)))
    hits: list[np.ndarray] = []
    for i in range(len(curve) - 1):
        for j in range(len(mirror) - 1):
            hits += _segment_intersections(curve[i], curve[i + 1], mirror[j], mirror[j + 1], tol)
    # the game is symmetric, so the crossing set is too; enforce it after rounding
    hits += [h[::-1].copy() for h in hits]
    diag = [h for h in hits if abs(h[0] - h[1]) <= tol]
    off = [h for h in hits if abs(h[0] - h[1]) > tol]
    kept = _dedup(diag, dedup)
    for p in _dedup(off, dedup):
        if all(np.linalg.norm(p - k) > dedup for k in kept):
            kept.append(p)
    kept = [k for k in kept if k[0] <= k[1] + tol]
    out = set()
    for k in kept:
        x, y = float(k[0]), float(k[1])
        if abs(x - y) <= tol:
            x = y = 0.5 * (x + y)
        out.add((x, y))
        out.add((y, x))
    return sorted(out)


def pareto_profiles(grid: PayoffGrid, rtol: float = 1e-12) -> list[Point]:
    """Grid profiles maximizing the sum of both designers' payoffs; all ties kept."""
    joint = grid.payoff_a + grid.payoff_a.T
    top = joint.max()
    i, j = np.nonzero(joint >= top - rtol * max(1.0, abs(top)))
    e = grid.eps_axis
    return sorted((float(e[a]), float(e[b])) for a, b in zip(i, j))


def equilibria(grid: PayoffGrid) -> EquilibriumSet:
    return EquilibriumSet(grid.g, nash_equilibria(best_response(grid)), pareto_profiles(grid))


def perturb_row(tau: np.ndarray, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Move ``eta`` of occupancy from one region to another, uniformly among admissible pairs."""
    up = [r for r in range(4) if tau[r] <= 1.0 - eta]
    down = [r for r in range(4) if tau[r] >= eta]
    pairs = [(u, d) for u in up for d in down if u != d]
    if not pairs:
        raise ValueError(f"no admissible perturbation of {tau} with eta={eta}")
    u, d = pairs[int(rng.integers(len(pairs)))]
    out = np.array(tau, dtype=float)
    out[u] += eta
    out[d] -= eta
    return out


@dataclass
class FrequencyRow:
    g: float
    eps_lo: float
    eps_hi: float
    freq: float


def _bin_of(e: float, axis: np.ndarray) -> int:
    # bins [axis[m], axis[m+1]); the last one also takes the top of the axis
    m = int(np.searchsorted(axis, e + 1e-12, side="right")) - 1
    return min(max(m, 0), len(axis) - 2)


def perturb_and_count(table: TauTable, M: int, eta: float, seed: int = 0) -> list[FrequencyRow]:
    """Share of ``M`` perturbed replicas with a symmetric Nash point in each exploration bin, per g."""
    if M < 1:
        raise ValueError("need at least one replica")
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    gs = table.g_values()
    axis = np.array(table.eps_values())
    hits = {g: np.zeros(len(axis) - 1) for g in gs}
    base = table.tau_matrix()
    for m in range(M):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(m,)))
        noisy = table.with_taus(np.array([perturb_row(t, eta, rng) for t in base]))
        for g in gs:
            found = np.zeros(len(axis) - 1, dtype=bool)
            for x, y in nash_equilibria(best_response(synthesize_payoffs(noisy, g, axis))):
                if abs(x - y) <= 1e-9:
                    found[_bin_of(x, axis)] = True
            hits[g] += found
    return [FrequencyRow(g, float(axis[b]), float(axis[b + 1]), float(hits[g][b] / M))
            for g in gs for b in range(len(axis) - 1)]


def frequency_csv(rows: Sequence[FrequencyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FREQ_HEADER)
    for r in rows:
        w.writerow([repr(float(r.g)), repr(float(r.eps_lo)), repr(float(r.eps_hi)), repr(float(r.freq))])
    return buf.getvalue()


def equilibria_json(sets: Sequence[EquilibriumSet]) -> str:
    records = [rec for s in sets for rec in s.to_records()]
    return json.dumps(records, indent=2, sort_keys=True) + "\n"
