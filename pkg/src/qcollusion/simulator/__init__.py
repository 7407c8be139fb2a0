"""Discrete stochastic process of two epsilon-greedy Q-learners."""

from .core import (
    ModelParams,
    RunRecord,
    SimConfig,
    TauEstimate,
    TransitionMatrix,
    classify,
    estimate_tau,
    one_step_increments,
    run,
    run_batch,
    run_stream,
    sample_initial_q,
    transition_stats,
)
from .sweep import PROFILES, Profile, make_grid, sweep
from .tables import TauRow, TauTable, read_terminal_csv

__all__ = [
    "ModelParams", "RunRecord", "SimConfig", "TauEstimate", "TransitionMatrix", "classify",
    "estimate_tau", "one_step_increments", "run", "run_batch", "run_stream", "sample_initial_q",
    "transition_stats", "PROFILES", "Profile", "make_grid", "sweep", "TauRow", "TauTable",
    "read_terminal_csv",
]
