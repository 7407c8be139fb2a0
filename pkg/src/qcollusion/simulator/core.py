"""Single trajectories, occupancy estimates and transition counts."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..agent import sample_initial
from ..game import REGIONS, Region, StageGame
from . import _kernel

TRACE_MODES = ("none", "window", "full")


@dataclass(frozen=True)
class ModelParams:
    g: float
    gamma: float = 0.95
    alpha: float = 0.1
    eps_a: float = 0.1
    eps_b: float = 0.1

    def __post_init__(self) -> None:
        StageGame(self.g)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"learning rate must lie in (0, 1], got {self.alpha}")
        for e in (self.eps_a, self.eps_b):
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"exploration rate must lie in [0, 1], got {e}")

    @property
    def triplet(self) -> tuple[float, float, float]:
        return (self.g, self.eps_a, self.eps_b)

    def payoff_matrix(self) -> np.ndarray:
        return np.array(StageGame(self.g).matrix(), dtype=float)

    def swapped(self) -> "ModelParams":
        return ModelParams(self.g, self.gamma, self.alpha, self.eps_b, self.eps_a)


@dataclass(frozen=True)
class SimConfig:
    T: int = 20_000
    W: int = 1_000
    k: int = 20
    seed: int = 0
    trace: str = "none"

    def __post_init__(self) -> None:
        if not 0 < self.W <= self.T:
            raise ValueError(f"need 0 < W <= T, got W={self.W}, T={self.T}")
        if self.k < 1:
            raise ValueError(f"need at least one run, got k={self.k}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        if self.trace not in TRACE_MODES:
            raise ValueError(f"trace must be one of {TRACE_MODES}")


@dataclass
class RunRecord:
    initial_q: np.ndarray
    terminal_q: np.ndarray
    window_regions: np.ndarray  # counts indexed by Region
    transitions: np.ndarray  # 4x4 counts, from-row to-column
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def fractions(self) -> np.ndarray:
        return self.window_regions / self.window_regions.sum()

    def region_counts(self) -> dict[Region, int]:
        return {r: int(self.window_regions[r]) for r in REGIONS}


def classify(q: Sequence[float]) -> Region:
    """Componentwise argmax; an exact tie counts as preferring D."""
    return Region(int(_kernel.region_of(np.asarray(q, dtype=float))))


def _float_word(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def run_stream(seed: int, params: ModelParams, run_index: int) -> np.random.Generator:
    """PCG64 stream keyed by the seed, the parameter values and the run index.

    Keying on values rather than on grid position makes sweep results
    independent of grid ordering and of how work is split across workers.
    """
    key = tuple(_float_word(v) for v in (params.g, params.gamma, params.alpha, params.eps_a, params.eps_b))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key + (int(run_index),))
    return np.random.Generator(np.random.PCG64(ss))


def sample_initial_q(params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    qa = sample_initial(params.g, params.gamma, rng)
    qb = sample_initial(params.g, params.gamma, rng)
    return np.array([qa.q_c, qa.q_d, qb.q_c, qb.q_d])


def run(
    params: ModelParams, init: Sequence[float], cfg: SimConfig, rng: np.random.Generator
) -> RunRecord:
    q = np.array(init, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"initial state must be 4 finite values, got {init!r}")
    trace_from = {"none": cfg.T, "window": cfg.T - cfg.W, "full": 0}[cfg.trace]
    trace = np.empty((cfg.T - trace_from, 4))
    counts, trans = _kernel.run(
        q, params.payoff_matrix(), params.gamma, params.alpha, params.eps_a, params.eps_b,
        cfg.T, cfg.W, rng, trace, trace_from,
    )
    return RunRecord(
        initial_q=np.array(init, dtype=float),
        terminal_q=q,
        window_regions=counts,
        transitions=trans,
        trace=trace if cfg.trace != "none" else None,
    )


def run_batch(params: ModelParams, cfg: SimConfig, seed: int | None = None) -> list[RunRecord]:
    """``cfg.k`` independent runs from uniform initial conditions in the interval box."""
    seed = cfg.seed if seed is None else seed
    records = []
    for r in range(cfg.k):
        rng = run_stream(seed, params, r)
        records.append(run(params, sample_initial_q(params, rng), cfg, rng))
    return records


@dataclass
class TauEstimate:
    tau: np.ndarray  # mean window fraction per region
    run_fractions: np.ndarray  # (k, 4)
    terminal_q: np.ndarray  # (k, 4)

    @property
    def stderr(self) -> np.ndarray:
        k = self.run_fractions.shape[0]
        if k < 2:
            return np.full(4, np.inf)
        return self.run_fractions.std(axis=0, ddof=1) / np.sqrt(k)


def estimate_tau(params: ModelParams, cfg: SimConfig, seed: int | None = None) -> TauEstimate:
    records = run_batch(params, cfg, seed)
    fr = np.array([rec.fractions for rec in records])
    return TauEstimate(
        tau=fr.mean(axis=0),
        run_fractions=fr,
        terminal_q=np.array([rec.terminal_q for rec in records]),
    )


@dataclass
class TransitionMatrix:
    counts: np.ndarray  # 4x4 integer counts

    @property
    def probabilities(self) -> np.ndarray:
        """Row-normalized frequencies; rows of unvisited regions are NaN."""
        rows = self.counts.sum(axis=1, keepdims=True).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, self.counts / rows, np.nan)

    def defined(self, region: Region) -> bool:
        return bool(self.counts[region].sum() > 0)

    def prob(self, src: Region, dst: Region) -> float:
        return float(self.probabilities[src, dst])

    @property
    def cc_to_cd_given_asymmetric(self) -> float:
        """P(CC -> CD | CC -> CD or DC); NaN when no such exit was seen."""
        cd = self.counts[Region.CC, Region.CD]
        dc = self.counts[Region.CC, Region.DC]
        return float(cd / (cd + dc)) if cd + dc > 0 else float("nan")

    def to_dict(self) -> dict:
        p = self.probabilities
        out: dict = {}
        for s in REGIONS:
            for d in REGIONS:
                out[f"{s.name}->{d.name}"] = None if np.isnan(p[s, d]) else float(p[s, d])
        v = self.cc_to_cd_given_asymmetric
        out["CC->CD|CC->CD+DC"] = None if np.isnan(v) else v
        out["counts"] = {f"{s.name}->{d.name}": int(self.counts[s, d]) for s in REGIONS for d in REGIONS}
        return out


def transition_stats(params: ModelParams, cfg: SimConfig, seed: int | None = None) -> TransitionMatrix:
    records = run_batch(params, cfg, seed)
    return TransitionMatrix(sum(rec.transitions for rec in records))


def one_step_increments(
    q: Sequence[float], params: ModelParams, n: int, rng: np.random.Generator
) -> np.ndarray:
    """``n`` independent one-step increments from the fixed state ``q``, shape (n, 4)."""
    return _kernel.increments(
        np.asarray(q, dtype=float), params.payoff_matrix(), params.gamma, params.alpha,
        params.eps_a, params.eps_b, int(n), rng,
    )
