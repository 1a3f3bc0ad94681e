"""Semiclassical four-mode dynamics of a Bose-Einstein condensate in a double well."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .eigensolver import (
    CoefficientCache,
    CoefficientIntegrals,
    EigenSolution,
    LocalizedModes,
    ModelParams,
    PotentialSpec,
    build_localized_modes,
    model_params,
    solve_integrals,
    solve_spectrum,
)
from .model import (
    LabState,
    PendulumState,
    Regime,
    RegimeIndicators,
    averaged_hamiltonian,
    classify_regime,
    eom_averaged,
    eom_full,
    eom_linearized,
    from_pendulum,
    hamiltonian,
    linearized_matrix,
    normal_mode_frequencies,
    to_pendulum,
)
from .dynamics import (
    IntegratorConfig,
    Model,
    Termination,
    Trajectory,
    detect_self_trapping,
    estimate_frequency,
    integrate,
    integrate_backward,
    phase_portrait,
    poincare_section,
)
from .fixed_points import (
    Stability,
    analytic_fixed_points,
    critical_imbalance,
    effective_fixed_points,
    jacobian_stability,
    pitchfork_points,
)
from .regime_map import SweepGrid, boundary_curves, sweep
