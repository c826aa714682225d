"""Active reward learning from human queries.

A learner keeps a particle posterior over unit reward-weight vectors and
chooses, at every step, which of five query types to pose to a human:
label a trajectory, compare dataset trajectories, demonstrate from a start
cell, judge a feature's relevance, or correct a stored trajectory. Each
answer moves a (dataset, belief) state forward; information gain scores
what a query is worth before asking it.
"""
from .acquisition import (
    ScoredQuery,
    Strategy,
    info_gain,
    model_change_score,
    predictive_distribution,
    qbc_score,
    select_query,
    uncertainty_score,
)
from .belief import Belief, bayes_update, init_belief, mean_estimate, relearn, spread
from .domain import (
    ACTIONS,
    DEFAULT_FEATURE_DIM,
    FEATURE_NAMES,
    GridWorld,
    Trajectory,
    enumerate_trajectories,
    features,
    step,
)
from .estimator import RewardBeliefEstimator
from .harness import (
    ExperimentConfig,
    compare_strategies,
    load_config,
    parse_config,
    replay_transcript,
    run_experiment,
)
from .humans import (
    ObservationModel,
    SimulatedHuman,
    grad_log_likelihood,
    likelihood,
    respond,
    response_distribution,
)
from .imdp import (
    InfoState,
    LabeledItem,
    QueryBudgets,
    TransitionConfig,
    initial_state,
    legal_queries,
    replay,
    transition,
)
from .queries import (
    ComparisonQuery,
    CorrectionQuery,
    DemonstrationQuery,
    Evidence,
    FeatureLabelQuery,
    LabelQuery,
    Query,
    Response,
    response_support,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "Belief",
    "ComparisonQuery",
    "CorrectionQuery",
    "DEFAULT_FEATURE_DIM",
    "DemonstrationQuery",
    "Evidence",
    "ExperimentConfig",
    "FEATURE_NAMES",
    "FeatureLabelQuery",
    "GridWorld",
    "InfoState",
    "LabelQuery",
    "LabeledItem",
    "ObservationModel",
    "Query",
    "QueryBudgets",
    "Response",
    "RewardBeliefEstimator",
    "ScoredQuery",
    "SimulatedHuman",
    "Strategy",
    "Trajectory",
    "TransitionConfig",
    "bayes_update",
    "compare_strategies",
    "enumerate_trajectories",
    "features",
    "grad_log_likelihood",
    "info_gain",
    "init_belief",
    "initial_state",
    "legal_queries",
    "likelihood",
    "load_config",
    "mean_estimate",
    "model_change_score",
    "parse_config",
    "predictive_distribution",
    "qbc_score",
    "relearn",
    "replay",
    "replay_transcript",
    "respond",
    "response_distribution",
    "response_support",
    "run_experiment",
    "select_query",
    "spread",
    "step",
    "transition",
    "uncertainty_score",
]
