"""Continuous-time approximation and its Filippov treatment."""

from .model import (
    BOUNDARY_A,
    BOUNDARY_B,
    ModelTrajectory,
    PseudoEquilibrium,
    SlidingSolution,
    affine_system,
    dd_steady_state,
    default_step,
    expected_payoff,
    flow,
    integrate,
    integrate_symmetric,
    model_system,
    no_steady_state_residual,
    region_field,
    sliding,
    symmetric_pseudo_equilibria,
    symmetric_system,
    symmetric_threshold,
)
from .piecewise import (
    CODIM2_ABORT,
    CONVERGED,
    HORIZON,
    SLIDING_ENTERED,
    PiecewiseSystem,
    SlidingCombination,
    Surface,
    Trajectory,
    integrate_piecewise,
    sliding_combination,
)

__all__ = [
    "BOUNDARY_A", "BOUNDARY_B", "ModelTrajectory", "PseudoEquilibrium", "SlidingSolution", "affine_system",
    "dd_steady_state", "default_step", "expected_payoff", "flow", "integrate", "integrate_symmetric",
    "model_system", "no_steady_state_residual", "region_field", "sliding", "symmetric_pseudo_equilibria",
    "symmetric_system", "symmetric_threshold", "CODIM2_ABORT", "CONVERGED", "HORIZON", "SLIDING_ENTERED",
    "PiecewiseSystem", "SlidingCombination", "Surface", "Trajectory", "integrate_piecewise",
    "sliding_combination",
]
