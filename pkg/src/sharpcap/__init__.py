"""Sharpness-capped surrogate training and search for offline black-box optimization."""

__version__ = "0.1.0"

from .mlp import (
    MlpSpec,
    Surrogate,
    axpy,
    init_params,
    input_grad,
    input_grad_batch,
    loss_and_grad,
    loss_and_mean_output_grad,
    mean_output_grad,
    norm2,
    predict,
    predict_batch,
)
from .quadratic import (
    ConstructionReport,
    QuadraticSurrogate,
    base_value_and_derivs,
    check_construction,
    expansion_grad,
    expansion_value,
    reference_hessian_diag,
)
from .search import (
    CandidateSet,
    PercentileReport,
    SearchConfig,
    candidate_sharpness,
    evaluate_candidates,
    grad_ascent_search,
    reinforce_search,
)
from .sharpness import (
    BallOracleConfig,
    SharpnessEstimate,
    first_order_sharpness,
    grad_of_grad_norm,
    grad_of_grad_norm_from,
    sampled_sharpness,
)
from .tasks import (
    OfflineDataset,
    SyntheticTask,
    generate_offline_dataset,
    load_dataset,
    make_task,
    neg_ackley,
    neg_branin,
    neg_rastrigin,
    normalize_score,
    oracle_batch,
    oracle_eval,
    quad_bowl,
    save_dataset,
    standard_suite,
)
from .trainers import (
    IgniteConfig,
    TrainTrace,
    make_trainer,
    train_erm,
    train_ignite,
    train_ignite2,
    train_penalized,
    train_sam,
)
