"""Nash equilibria and potential-based reward shaping for finite
discounted general-sum stochastic games."""

from .errors import (
    CancelledError,
    ConfigError,
    DivergenceError,
    DomainError,
    GameFileError,
    SearchSpaceError,
)
from .model import (
    MatrixGame,
    Policy,
    PolicyProfile,
    PotentialSet,
    StochasticGame,
    evaluate_profile,
    induced_mdp,
    single_state_game,
    validate_game,
)
from .matrix import (
    MatrixEquilibrium,
    best_response_regret,
    pure_equilibria,
    solve_zero_sum,
    support_enumeration,
)
from .solver import (
    EquilibriumSolution,
    mdp_value_iteration,
    pure_stationary_equilibria,
    q_from_v,
    shapley_value_iteration,
    solve_single_state,
    verify_nash,
)
from .shaping import (
    CheckReport,
    NecessityInstance,
    ShapingFunction,
    apply_shaping,
    build_necessity_counterexample,
    check_eq23,
    check_offset_identities,
    classify_shaping,
    potential_to_shaping,
    profile_value_offset,
)
from .envs import (
    Environment,
    ShapedEnvironment,
    grid_soccer,
    repeated_matrix_env,
    table_environment,
)
from .learn import (
    ExperimentConfig,
    IndependentQAgent,
    LearningCurve,
    MinimaxQAgent,
    Schedules,
    run_comparison,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
