from collections import defaultdict

import numpy as np
import pytest

from qcollusion.clustering import run_pipeline
from qcollusion.simulator import SimConfig, make_grid, sweep

DESK_SEED = 2024
DESK_CFG = SimConfig(T=20_000, W=1_000, k=20, seed=DESK_SEED)
DESK_EPS = [float(e) for e in np.linspace(0.0, 1.0, 16)]
SYMMETRIC_G = [float(g) for g in np.linspace(1.0, 2.0, 16)]
# 0.1 steps plus the coupling-share check point
FULL_G = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.84, 1.9, 2.0]

_REPORT: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)
_TITLES = {
    1: "flow equals one-step expectation",
    2: "all-defect steady state",
    3: "two-sided toy system slides to its pseudo steady state",
    4: "symmetric coupling boundary",
    5: "extreme exploration rates",
    6: "designing-game payoff orderings",
    7: "coupling detection across g",
    8: "property suites",
}


@pytest.fixture(scope="session")
def report():
    """``report(criterion, part, ok, detail)`` adds one line to the end-of-run acceptance summary."""

    def add(criterion: int, part: str, ok: bool, detail: str = "") -> None:
        _REPORT[criterion].append((part, bool(ok), detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(_REPORT):
        parts = _REPORT[c]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        failed = [f"{p}: {d}" for p, ok, d in parts if not ok]
        tail = f" ({len(parts)} checks)" if not failed else " | failing: " + "; ".join(failed)
        tr.write_line(f"criterion {c} [{_TITLES.get(c, '')}]: {verdict}{tail}")


@pytest.fixture(scope="session")
def symmetric_sweep():
    return sweep(make_grid(SYMMETRIC_G, DESK_EPS, symmetric=True), DESK_CFG, jobs=None)


@pytest.fixture(scope="session")
def full_sweep():
    return sweep(make_grid(FULL_G, DESK_EPS), DESK_CFG, jobs=None)


@pytest.fixture(scope="session")
def full_basins(full_sweep):
    rows = list(full_sweep)
    return run_pipeline([(r.g, r.eps_a, r.eps_b) for r in rows], [r.tau[0] for r in rows],
                        [r.terminal_q for r in rows], seed=DESK_SEED)
