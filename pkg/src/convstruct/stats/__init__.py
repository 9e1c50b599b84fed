"""Statistical machinery: bootstrap intervals, rank correlation, calibrated
Dirichlet log-odds with Stouffer aggregation, multinomial regression, and
gendered thread-dynamics shares."""

from .bootstrap import BootstrapConfig, BootstrapInterval, bootstrap_ci
from .correlation import signed_rank_variance, spearman
from .logodds import (
    Document,
    LogOddsResult,
    TermCounts,
    calibrate_prior,
    stouffer,
    tokenize,
    weighted_logodds,
    weighted_logodds_analysis,
)
from .regression import LogitResult, OutcomeEstimate, multinomial_logit
from .gender import (
    RoleDistributions,
    ThreadShareReport,
    gender_thread_shares,
    role_distributions,
)

__all__ = [
    "BootstrapConfig",
    "BootstrapInterval",
    "bootstrap_ci",
    "spearman",
    "signed_rank_variance",
    "Document",
    "TermCounts",
    "LogOddsResult",
    "tokenize",
    "weighted_logodds",
    "weighted_logodds_analysis",
    "calibrate_prior",
    "stouffer",
    "LogitResult",
    "OutcomeEstimate",
    "multinomial_logit",
    "ThreadShareReport",
    "RoleDistributions",
    "gender_thread_shares",
    "role_distributions",
]
