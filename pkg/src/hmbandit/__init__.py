"""Hidden-Markov restless bandit toolkit.

A single arm is a two-state hidden Markov chain observed through a noisy
binary signal whenever it is sampled.  The package solves the discounted
belief-state dynamic program for one arm, detects threshold structure in
the optimal policy, computes subsidy (Whittle-type) indices in closed form
or numerically, and simulates many arms under index, myopic, and random
sampling policies.
"""

from .arm import (
    ArmParams,
    beta1_lower_bound,
    classify_region,
    fixed_point,
    gamma0,
    gamma1,
    gamma2,
    kappa1,
    region_boundaries,
    rho,
    special_case,
    validate,
)
from .errors import (
    DegenerateObservation,
    HMBanditError,
    HorizonTooLarge,
    IterationBudgetExceeded,
    MissingIndexTable,
    NoConvergence,
    NoCrossingInBracket,
    NonTerminatingTau,
    OrderViolation,
    OutOfRange,
    ParseError,
    TooCoarse,
    UnsupportedOrdering,
    ValidationError,
)
from .index import (
    IndexabilityReport,
    ThresholdResult,
    WhittleTable,
    indexability_check,
    sampling_advantage,
    threshold,
    threshold_curve,
    whittle_closed_form,
    whittle_numeric,
    whittle_table,
    write_threshold_curve_csv,
)
from .sim import (
    BanditConfig,
    EpisodeTrace,
    MyopicPolicy,
    RandomPolicy,
    SimStats,
    SystemState,
    WhittlePolicy,
    monte_carlo,
    myopic_index,
    run_episode,
    step,
)
from .solver import (
    BeliefGrid,
    ValueTable,
    bellman_backup,
    build_grid,
    convexity_report,
    finite_horizon_oracle,
    oracle_error_bound,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "ArmParams",
    "BanditConfig",
    "BeliefGrid",
    "EpisodeTrace",
    "IndexabilityReport",
    "MyopicPolicy",
    "RandomPolicy",
    "SimStats",
    "SystemState",
    "ThresholdResult",
    "ValueTable",
    "WhittlePolicy",
    "WhittleTable",
    "bellman_backup",
    "beta1_lower_bound",
    "build_grid",
    "classify_region",
    "convexity_report",
    "finite_horizon_oracle",
    "fixed_point",
    "gamma0",
    "gamma1",
    "gamma2",
    "indexability_check",
    "kappa1",
    "monte_carlo",
    "myopic_index",
    "oracle_error_bound",
    "region_boundaries",
    "rho",
    "run_episode",
    "sampling_advantage",
    "solve",
    "special_case",
    "step",
    "threshold",
    "threshold_curve",
    "write_threshold_curve_csv",
    "validate",
    "whittle_closed_form",
    "whittle_numeric",
    "whittle_table",
    # errors
    "HMBanditError",
    "OutOfRange",
    "OrderViolation",
    "DegenerateObservation",
    "NoConvergence",
    "UnsupportedOrdering",
    "TooCoarse",
    "IterationBudgetExceeded",
    "HorizonTooLarge",
    "NonTerminatingTau",
    "NoCrossingInBracket",
    "MissingIndexTable",
    "ParseError",
    "ValidationError",
]
