"""treetops: extremes of hierarchical Gaussian energy fields.

A simulation and verification lab for the two-parameter family of Gaussian
fields on binary-string configuration spaces whose correlation tree has
K = N^alpha coarse scales. alpha = 0 is the independent (random-energy)
case, alpha = 1 the fully branching one; the package measures how extremal
statistics (mean window counts, avoidance functions, recentered maxima,
pair overlaps) move between those ends, and verifies the bookkeeping
(ballot identities, Poisson distances, barrier filters) that the limit
arguments rest on.
"""

from .field_model import (
    Barrier,
    Interval,
    ModelParams,
    barrier_profile,
    barrier_value,
    beta_c,
    centering,
    covariance,
    default_gamma,
    intensity,
    overlap,
)
from .rng import SeedSpec, gaussians, raw_words, uniforms_from_words
from .tree_sampler import (
    BudgetError,
    ExtremalPoint,
    PointProcessSample,
    draws_per_replicate,
    leaf_labels,
    replicate_batch,
    sample_topk,
    sample_window,
)
from .extremal_stats import (
    MaxLawReport,
    MeanMeasureReport,
    OverlapCensus,
    avoidance_probability,
    empirical_mean_measure,
    exact_unbarred_mean,
    gumbel_report,
    log_correction_fit,
    mean_measure_report,
    pair_overlap_census,
)
from .bridge_lab import (
    BridgePath,
    PerturbationReport,
    ballot_exact,
    bridge_below_mc,
    perturbation_check,
    rotation_oracle,
)
from .poisson_tools import (
    ChenSteinInput,
    avoidance_gap_budget,
    chen_stein_bound,
    tv_poisson,
)

__version__ = "0.1.0"

__all__ = [
    "Barrier", "Interval", "ModelParams", "barrier_profile", "barrier_value",
    "beta_c", "centering", "covariance", "default_gamma", "intensity", "overlap",
    "SeedSpec", "gaussians", "raw_words", "uniforms_from_words",
    "BudgetError", "ExtremalPoint", "PointProcessSample", "draws_per_replicate",
    "leaf_labels", "replicate_batch", "sample_topk", "sample_window",
    "MaxLawReport", "MeanMeasureReport", "OverlapCensus",
    "avoidance_probability", "empirical_mean_measure", "exact_unbarred_mean",
    "gumbel_report", "log_correction_fit", "mean_measure_report",
    "pair_overlap_census",
    "BridgePath", "PerturbationReport", "ballot_exact", "bridge_below_mc",
    "perturbation_check", "rotation_oracle",
    "ChenSteinInput", "avoidance_gap_budget", "chen_stein_bound", "tv_poisson",
    "__version__",
]
