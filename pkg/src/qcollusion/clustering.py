"""K-means and the three-stage detection of coupled outcomes.

Stage 1 splits all triplets by their time share in mutual cooperation.
Stage 2 splits the terminal Q-vectors of each flagged triplet into two
groups. Stage 3 clusters the stage-2 summaries across triplets to tell apart
triplets whose runs really end in two places from those with one spread-out
cloud, and turns the first kind into a coupling share.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .simulator.core import ModelParams
from .ode import dd_steady_state

FORCED_ZERO = "forced-zero"
FORCED_ONE = "forced-one"
MEASURED = "measured"
BASIN_HEADER = ["g", "eps_a", "eps_b", "lambda", "provenance"]


@dataclass
class ClusterResult:
    centers: np.ndarray  # (K, d), sorted lexicographically
    labels: np.ndarray  # (n,)
    inertia: float  # sum of squared Euclidean distances to the assigned centers
    history: np.ndarray  # inertia after every Lloyd iteration of the winning restart

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.centers))


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or not np.all(np.isfinite(x)):
        raise ValueError("points must be a finite (n, d) array")
    return x


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, list[float]]:
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d2.argmin(axis=1)
        counts = np.bincount(new, minlength=len(centers))
        for k in np.flatnonzero(counts == 0):
            # reseed from the point worst served by its own center
            own = np.where(counts[new] > 1, d2[np.arange(len(x)), new], -np.inf)
            far = int(own.argmax())
            centers[k] = x[far]
            new[far] = k
            d2[:, k] = ((x - centers[k]) ** 2).sum(axis=1)
            counts = np.bincount(new, minlength=len(centers))
        centers = np.array([x[new == k].mean(axis=0) for k in range(len(centers))])
        history.append(float(((x - centers[new]) ** 2).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    return centers, labels, history


def kmeans(points, K: int = 2, restarts: int = 10, seed=0, max_iter: int = 300) -> ClusterResult:
    """Lloyd's algorithm, best of ``restarts`` initializations from random observations.

    Points are put in lexicographic order before seeding, so the result
    does not depend on the order the caller supplies them in.
    """
    x = _as_points(points)
    n = len(x)
    if K < 1:
        raise ValueError("K must be positive")
    if n < K:
        raise ValueError(f"need at least K={K} points, got {n}")
    if restarts < 1:
        raise ValueError("restarts must be positive")
    order = np.lexsort(x.T[::-1])
    xs = x[order]
    rng = _rng(seed)
    best = None
    for _ in range(restarts):
        init = xs[rng.choice(n, size=K, replace=False)].copy()
        centers, labels, history = _lloyd(xs, init, max_iter)
        if best is None or history[-1] < best[2][-1]:
            best = (centers, labels, history)
    centers, labels, history = best
    rank = np.lexsort(centers.T[::-1])
    relabel = np.empty(K, dtype=int)
    relabel[rank] = np.arange(K)
    out = np.empty(n, dtype=int)
    out[order] = relabel[labels]
    return ClusterResult(centers[rank], out, history[-1], np.array(history))


def inertia(points, centers, labels) -> float:
    x = _as_points(points)
    c = np.asarray(centers, dtype=float).reshape(len(centers), -1)
    return float(((x - c[np.asarray(labels)]) ** 2).sum())


def detect_coupling(tau_cc: Sequence[float], restarts: int = 10, seed=0) -> np.ndarray:
    """Flag the triplets in the upper of two 1-D clusters of mutual-cooperation share."""
    v = np.asarray(tau_cc, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError("need at least two triplets")
    if np.ptp(v) == 0.0:
        return np.zeros(len(v), dtype=bool)
    res = kmeans(v, 2, restarts, seed)
    return res.labels == int(np.argmax(res.centers[:, 0]))


@dataclass
class TripletSplit:
    """Stage-2 summary of one triplet's terminal Q-vectors."""

    clusters: ClusterResult
    inertia_gap: float  # inertia(K=1) - inertia(K=2)
    center_distance: float


def split_terminal_states(terminal_q, restarts: int = 10, seed=0) -> TripletSplit:
    q = _as_points(terminal_q)
    if len(q) < 4:
        raise ValueError(f"need at least 4 runs per triplet, got {len(q)}")
    two = kmeans(q, 2, restarts, seed)
    one = float(((q - q.mean(axis=0)) ** 2).sum())
    return TripletSplit(two, one - two.inertia, float(np.linalg.norm(two.centers[0] - two.centers[1])))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class MetaContext:
    """Stage-3 model: how to map a stage-2 summary to 'two clusters' or 'one cluster'."""

    gap_mean: float
    gap_std: float
    centers: np.ndarray | None  # (2, 2) meta centers, None when stage 3 was skipped
    two_cluster: int  # index of the meta center meaning two real clusters

    def features(self, split: TripletSplit) -> np.ndarray:
        z = (split.inertia_gap - self.gap_mean) / self.gap_std if self.gap_std > 0 else 0.0
        return np.array([_sigmoid(z), split.center_distance])

    def is_two_cluster(self, split: TripletSplit) -> bool:
        if self.centers is None:
            return True
        d = ((self.centers - self.features(split)) ** 2).sum(axis=1)
        return int(d.argmin()) == self.two_cluster


def fit_meta(splits: Sequence[TripletSplit], restarts: int = 10, seed=0) -> MetaContext:
    """Cluster stage-2 summaries; the center with the larger separation means two clusters.

    With fewer than two distinct summaries there is nothing to split and every
    triplet is treated as having two clusters.
    """
    gaps = np.array([s.inertia_gap for s in splits], dtype=float)
    mean = float(gaps.mean()) if len(gaps) else 0.0
    std = float(gaps.std()) if len(gaps) else 0.0
    ctx = MetaContext(mean, std, None, 0)
    if len(splits) < 2:
        return ctx
    feats = np.array([ctx.features(s) for s in splits])
    if np.all(np.ptp(feats, axis=0) == 0.0):
        return ctx
    res = kmeans(feats, 2, restarts, seed)
    return MetaContext(mean, std, res.centers, int(np.argmax(res.centers[:, 1])))


@dataclass(frozen=True)
class BasinEstimate:
    g: float
    eps_a: float
    eps_b: float
    lam: float
    provenance: str


def measure_basin(terminal_q, params: ModelParams, meta: MetaContext, split: TripletSplit | None = None,
                  restarts: int = 10, seed=0) -> BasinEstimate:
    """Share of runs away from the all-defect steady state for one flagged triplet."""
    split = split or split_terminal_states(terminal_q, restarts, seed)
    g, ea, eb = params.triplet
    if not meta.is_two_cluster(split):
        return BasinEstimate(g, ea, eb, 1.0, FORCED_ONE)
    dd = dd_steady_state(params)
    far = int(np.argmax(np.linalg.norm(split.clusters.centers - dd, axis=1)))
    lam = float(np.mean(split.clusters.labels == far))
    return BasinEstimate(g, ea, eb, lam, MEASURED)


def _triplet_seed(seed: int, triplet) -> np.random.Generator:
    words = tuple(struct.unpack("<Q", struct.pack("<d", float(v)))[0] for v in triplet)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=words))


def run_pipeline(
    triplets: Sequence[tuple[float, float, float]],
    tau_cc: Sequence[float],
    terminal_qs: Sequence[np.ndarray],
    gamma: float = 0.95,
    alpha: float = 0.1,
    restarts: int = 10,
    seed: int = 0,
) -> list[BasinEstimate]:
    """All three stages over a sweep; one estimate per triplet, in input order."""
    if not (len(triplets) == len(tau_cc) == len(terminal_qs)):
        raise ValueError("triplets, tau_cc and terminal states must align")
    flags = detect_coupling(tau_cc, restarts, seed)
    splits = {}
    for i in np.flatnonzero(flags):
        splits[i] = split_terminal_states(terminal_qs[i], restarts, _triplet_seed(seed, triplets[i]))
    meta = fit_meta([splits[i] for i in sorted(splits)], restarts, seed)
    out = []
    for i, (g, ea, eb) in enumerate(triplets):
        if not flags[i]:
            out.append(BasinEstimate(g, ea, eb, 0.0, FORCED_ZERO))
            continue
        params = ModelParams(g=g, gamma=gamma, alpha=alpha, eps_a=ea, eps_b=eb)
        out.append(measure_basin(terminal_qs[i], params, meta, split=splits[i]))
    return out


def basin_csv(estimates: Sequence[BasinEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BASIN_HEADER)
    for e in estimates:
        w.writerow([repr(float(e.g)), repr(float(e.eps_a)), repr(float(e.eps_b)), repr(float(e.lam)), e.provenance])
    return buf.getvalue()


def read_basin_csv(text: str) -> list[BasinEstimate]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != BASIN_HEADER:
        raise ValueError(f"unexpected basin header {reader.fieldnames}")
    return [BasinEstimate(float(r["g"]), float(r["eps_a"]), float(r["eps_b"]), float(r["lambda"]), r["provenance"])
            for r in reader]
