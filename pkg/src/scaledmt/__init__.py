"""Scaled step-up multiple testing procedures.

Thresholds t_i = alpha * s(i) / m for a nondecreasing scaling function s
interpolate between Bonferroni (s = 1) and Benjamini-Hochberg (s(i) = i).
The package evaluates these procedures under the cost lambda E[V] - E[T],
computes exact finite-m laws of V / s(R v 1), and picks the exponent of
the power family s(i) = i^gamma.
"""

__version__ = "0.1.0"

from .core import (
    ContractError,
    DataError,
    DomainError,
    InvalidThresholdError,
    MixtureModel,
    NoSolutionError,
    RejectionOutcome,
    ScaledMTError,
    ScalingFunction,
    ThresholdSequence,
    UndefinedError,
    build_thresholds,
    eval_scaling,
    gaussian_shift_cdf,
    mixture_cdf,
)
from .procedures import LossSpec, classify_outcome, empirical_sfdp, loss, step_up
from .exact import (
    ExactSettings,
    conditional_fp_parameter,
    dsu,
    dsu_pmf,
    power_exact,
    psi,
    rejection_count_pmf,
    sev_exact,
    sfdp_cdf,
    sfdp_moment,
    stirling2,
)
from .optimality import figure1_data, lambda_of_delta, model_gain, optimal_cv
from .asymptotic import (
    AsymptoticProblem,
    asymptotic_loss,
    optimal_gamma,
    sev_delta_approx,
    sev_delta_variance,
    ustar,
)
from .simulation import Scenario, empirical_sev_fdr, generate_pvalues, run_grid
from .estimation import em_fit, estimated_optimal_gamma

__all__ = [name for name in dir() if not name.startswith("_")]
