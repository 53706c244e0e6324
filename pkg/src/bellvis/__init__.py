"""Critical white-noise visibilities of multiqubit states via local-polytope LPs."""

__version__ = "0.1.0"

from .behavior import Behavior, MeasurementSetting, Scenario, joint_probabilities
from .inequalities import (
    BellExpression,
    build_C_N,
    build_CH,
    build_M_N,
    build_symmetrized_CH,
    evaluate,
    find_n_crit,
    local_max,
    vcrit_dicke,
    vcrit_ghz,
    vcrit_nm2_product,
    vcrit_nm3_product,
)
from .local_polytope import (
    LPSolverError,
    ScenarioTooLarge,
    VisibilityLP,
    VisibilityResult,
    is_local,
    max_local_visibility,
)
from .optimize import (
    CriticalVisibilityEstimate,
    OptimizationConfig,
    check_pure_entangled_violation,
    max_entangling_projections,
    optimize_settings,
    optimize_state_and_settings,
)
from .states import (
    NoisyState,
    PureState,
    build_dicke,
    build_ghz,
    build_partially_product,
    build_w,
    random_pure_state,
)

__all__ = [
    "Behavior",
    "BellExpression",
    "CriticalVisibilityEstimate",
    "LPSolverError",
    "MeasurementSetting",
    "NoisyState",
    "OptimizationConfig",
    "PureState",
    "Scenario",
    "ScenarioTooLarge",
    "VisibilityLP",
    "VisibilityResult",
    "build_CH",
    "build_C_N",
    "build_M_N",
    "build_dicke",
    "build_ghz",
    "build_partially_product",
    "build_symmetrized_CH",
    "build_w",
    "check_pure_entangled_violation",
    "evaluate",
    "find_n_crit",
    "is_local",
    "joint_probabilities",
    "local_max",
    "max_entangling_projections",
    "max_local_visibility",
    "optimize_settings",
    "optimize_state_and_settings",
    "random_pure_state",
    "vcrit_dicke",
    "vcrit_ghz",
    "vcrit_nm2_product",
    "vcrit_nm3_product",
]
