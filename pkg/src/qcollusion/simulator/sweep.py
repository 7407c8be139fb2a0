"""Parameter sweeps over (g, eps_a, eps_b) grids."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ModelParams, SimConfig, estimate_tau
from .tables import TauRow, TauTable

Triplet = tuple[float, float, float]


@dataclass(frozen=True)
class Profile:
    n_g: int
    n_eps: int
    T: int
    W: int
    k: int

    def g_values(self) -> list[float]:
        return [float(x) for x in np.linspace(1.0, 2.0, self.n_g)]

    def eps_values(self) -> list[float]:
        return [float(x) for x in np.linspace(0.0, 1.0, self.n_eps)]


PROFILES = {
    "desk": Profile(n_g=16, n_eps=16, T=20_000, W=1_000, k=20),
    "full": Profile(n_g=64, n_eps=64, T=100_000, W=1_000, k=100),
}


def make_grid(g_values: Sequence[float], eps_values: Sequence[float], symmetric: bool = False) -> list[Triplet]:
    if symmetric:
        return [(float(g), float(e), float(e)) for g in g_values for e in eps_values]
    return [(float(g), float(a), float(b)) for g in g_values for a in eps_values for b in eps_values]


def _one(args) -> TauRow:
    (g, eps_a, eps_b), gamma, alpha, cfg = args
    params = ModelParams(g=g, gamma=gamma, alpha=alpha, eps_a=eps_a, eps_b=eps_b)
    est = estimate_tau(params, cfg)
    return TauRow(g, eps_a, eps_b, est.tau, cfg.k, cfg.T, cfg.W, cfg.seed,
                  run_fractions=est.run_fractions, terminal_q=est.terminal_q)


def sweep(
    grid: Sequence[Triplet],
    cfg: SimConfig,
    gamma: float = 0.95,
    alpha: float = 0.1,
    jobs: int | None = 1,
) -> TauTable:
    """Estimate occupancy fractions at every triplet, rows in grid order.

    Every run draws from a stream keyed on (seed, parameter values, run
    index), so the table does not depend on ``jobs`` or on grid order.
    """
    if not grid:
        raise ValueError("empty parameter grid")
    tasks = [(tuple(map(float, t)), gamma, alpha, cfg) for t in grid]
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) == 1:
        rows = [_one(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one, tasks, chunksize=chunk))
    return TauTable(rows)
