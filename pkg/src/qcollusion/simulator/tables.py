"""Occupancy tables and their file formats."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

TAU_HEADER = ["g", "eps_a", "eps_b", "tau_cc", "tau_cd", "tau_dc", "tau_dd", "k", "T", "W", "seed"]
TERMINAL_HEADER = ["g", "eps_a", "eps_b", "run", "qac", "qad", "qbc", "qbd"]


def fmt(x: float) -> str:
    # shortest round-trip repr keeps files bit-stable
    return repr(float(x))


def key_of(g: float, eps_a: float, eps_b: float) -> tuple[float, float, float]:
    return (round(float(g), 12), round(float(eps_a), 12), round(float(eps_b), 12))


@dataclass
class TauRow:
    g: float
    eps_a: float
    eps_b: float
    tau: np.ndarray
    k: int
    T: int
    W: int
    seed: int
    run_fractions: np.ndarray | None = field(default=None, repr=False, compare=False)
    terminal_q: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def key(self) -> tuple[float, float, float]:
        return key_of(self.g, self.eps_a, self.eps_b)

    def tau_stderr(self) -> np.ndarray | None:
        if self.run_fractions is None or len(self.run_fractions) < 2:
            return None
        return self.run_fractions.std(axis=0, ddof=1) / np.sqrt(len(self.run_fractions))


class TauTable:
    """Measured occupancy fractions, one row per (g, eps_a, eps_b)."""

    def __init__(self, rows: Iterable[TauRow] = ()):
        self.rows: list[TauRow] = []
        self._index: dict[tuple[float, float, float], TauRow] = {}
        for row in rows:
            self.add(row)

    def add(self, row: TauRow) -> None:
        tau = np.asarray(row.tau, dtype=float)
        if tau.shape != (4,) or np.any(tau < 0) or abs(tau.sum() - 1.0) > 1e-9:
            raise ValueError(f"invalid occupancy row at {row.key}: {tau}")
        if row.key in self._index:
            raise ValueError(f"duplicate triplet {row.key}")
        self.rows.append(row)
        self._index[row.key] = row

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[TauRow]:
        return iter(self.rows)

    def __contains__(self, key) -> bool:
        return key_of(*key) in self._index

    def lookup(self, g: float, eps_a: float, eps_b: float) -> TauRow:
        return self._index[key_of(g, eps_a, eps_b)]

    def g_values(self) -> list[float]:
        return sorted({r.g for r in self.rows})

    def eps_values(self) -> list[float]:
        return sorted({r.eps_a for r in self.rows} | {r.eps_b for r in self.rows})

    def slice_g(self, g: float) -> "TauTable":
        gk = round(float(g), 12)
        return TauTable(r for r in self.rows if r.key[0] == gk)

    def with_taus(self, taus: np.ndarray) -> "TauTable":
        """Copy with replaced occupancy vectors (same row order)."""
        out = TauTable()
        for row, tau in zip(self.rows, taus):
            out.add(TauRow(row.g, row.eps_a, row.eps_b, np.asarray(tau, dtype=float), row.k, row.T, row.W, row.seed,
                           row.run_fractions, row.terminal_q))
        return out

    def tau_matrix(self) -> np.ndarray:
        return np.array([r.tau for r in self.rows])

    # -- serialization -------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TAU_HEADER)
        for r in self.rows:
            w.writerow([fmt(r.g), fmt(r.eps_a), fmt(r.eps_b), *(fmt(t) for t in r.tau), r.k, r.T, r.W, r.seed])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "TauTable":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != TAU_HEADER:
            raise ValueError(f"unexpected occupancy header {reader.fieldnames}")
        rows = []
        for rec in reader:
            tau = np.array([float(rec[c]) for c in ("tau_cc", "tau_cd", "tau_dc", "tau_dd")])
            rows.append(TauRow(float(rec["g"]), float(rec["eps_a"]), float(rec["eps_b"]), tau,
                               int(rec["k"]), int(rec["T"]), int(rec["W"]), int(rec["seed"])))
        return cls(rows)

    @classmethod
    def read_csv(cls, path: str | Path) -> "TauTable":
        return cls.from_csv(Path(path).read_text())

    def terminal_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TERMINAL_HEADER)
        for r in self.rows:
            if r.terminal_q is None:
                continue
            for i, q in enumerate(r.terminal_q):
                w.writerow([fmt(r.g), fmt(r.eps_a), fmt(r.eps_b), i, *(fmt(v) for v in q)])
        return buf.getvalue()


def read_terminal_csv(path: str | Path) -> dict[tuple[float, float, float], np.ndarray]:
    """Terminal Q-vectors grouped by triplet, runs in file order."""
    groups: dict[tuple[float, float, float], list[list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TERMINAL_HEADER:
            raise ValueError(f"unexpected terminal-state header {reader.fieldnames}")
        for rec in reader:
            key = key_of(float(rec["g"]), float(rec["eps_a"]), float(rec["eps_b"]))
            groups.setdefault(key, []).append([float(rec[c]) for c in ("qac", "qad", "qbc", "qbd")])
    return {k: np.array(v) for k, v in groups.items()}
