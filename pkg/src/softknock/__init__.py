"""Soft multivariate ranks via entropic optimal transport, two-sample rank
statistics, and generative knockoffs with FDR-controlled selection."""

from .decorrelation import SdpSolution, correlation_with_ridge, d_corr, solve_sdp
from .generator import (
    GeneratorParams,
    KnockoffModel,
    LossBreakdown,
    TrainingConfig,
    forward,
    gradient,
    init_params,
    load_model,
    sample_knockoffs,
    save_model,
    second_order_loss,
    total_loss,
    train,
)
from .halton import HaltonGrid, generate
from .knockoff_filter import (
    LassoFit,
    SelectionOutcome,
    evaluate,
    knockoff_stats,
    lasso,
    run_filter,
    select,
    threshold,
)
from .ot import (
    CostMatrix,
    SinkhornConfig,
    SoftRankAssignment,
    TransportPlan,
    cost_matrix,
    exact_assignment,
    joint_soft_ranks,
    sinkhorn,
    soft_rank,
)
from .stats import (
    KernelSpec,
    SwapPattern,
    apply_swap,
    energy_distance,
    mmd_unbiased,
    rank_energy,
    soft_rank_energy,
    soft_rank_mmd,
    sre,
    srmmd,
    swap_loss_srmmd,
)
from .synth import (
    ResponseSpec,
    SynthSpec,
    ar1_covariance,
    gaussian_ar1,
    gmm3,
    response,
    sample,
    sparse_gaussian,
    student_t,
)

__version__ = "0.1.0"

__all__ = [
    "CostMatrix",
    "GeneratorParams",
    "HaltonGrid",
    "KernelSpec",
    "KnockoffModel",
    "LassoFit",
    "LossBreakdown",
    "ResponseSpec",
    "SdpSolution",
    "SelectionOutcome",
    "SinkhornConfig",
    "SoftRankAssignment",
    "SwapPattern",
    "SynthSpec",
    "TrainingConfig",
    "TransportPlan",
    "apply_swap",
    "ar1_covariance",
    "correlation_with_ridge",
    "cost_matrix",
    "d_corr",
    "energy_distance",
    "evaluate",
    "exact_assignment",
    "forward",
    "gaussian_ar1",
    "generate",
    "gmm3",
    "gradient",
    "init_params",
    "joint_soft_ranks",
    "knockoff_stats",
    "lasso",
    "load_model",
    "mmd_unbiased",
    "rank_energy",
    "response",
    "run_filter",
    "sample",
    "sample_knockoffs",
    "save_model",
    "second_order_loss",
    "select",
    "sinkhorn",
    "soft_rank",
    "soft_rank_energy",
    "soft_rank_mmd",
    "solve_sdp",
    "sparse_gaussian",
    "sre",
    "srmmd",
    "student_t",
    "swap_loss_srmmd",
    "threshold",
    "total_loss",
    "train",
]
