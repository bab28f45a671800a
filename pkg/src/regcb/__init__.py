"""Contextual bandit learning with regression oracles and confidence bounds."""

from .core import (
    BanditObservation,
    Context,
    Schedule,
    UNBOUNDED,
    WeightedRegressionExample,
    beta_schedule,
    c_delta,
    c_delta_covering,
    c_delta_joint,
    epoch_starts,
    is_unbounded,
    to_sum_radius,
    warm_start_epochs,
)
from .confidence import (
    BinSearchBudgetError,
    BinSearchResult,
    ConfidenceBounds,
    FiniteProbeProblem,
    RidgeProbeProblem,
    bin_search,
    binsearch_loop_budget,
    closed_form_ridge_bounds,
    exact_bounds_finite,
    plausible_actions,
)
from .oracles import (
    FeatureMap,
    FiniteClass,
    FiniteProductClass,
    LinearPredictor,
    ProductRidgeModel,
    RidgeModel,
    RidgeState,
)
from .learners import (
    BanditLearner,
    BootstrapLearner,
    EpsilonGreedyLearner,
    RegCBLearner,
    UniformLearner,
    bootstrap_act,
    bootstrap_scores,
    reduce_observation,
)
from .environments import (
    DatasetBanditEnv,
    HardTabularEnv,
    SupervisedDataset,
    SyntheticLinearEnv,
    hard_tabular_class,
    load_csv_dataset,
    noisy_reward_matrix,
)
from .evaluation import (
    MomentDiagnostics,
    RunRecord,
    empirical_margin,
    loss_cdf,
    moment_bounds,
    normalized_relative_loss,
    parameter_grid,
    psi_min,
    run_experiment,
    sliding_mean,
    slope_fit,
    supervised_skyline,
    u_lambda_mask,
    validate_policy,
)

__version__ = "0.1.0"
