"""Sensitivity analysis for Baron-Kenny mediation under unmeasured confounding.

Bias-adjusted direct and indirect effects under partial-correlation
sensitivity parameters, nonparametric-bootstrap inference, robustness values
via deterministic global optimization, formal benchmarking against observed
covariates, and an exact confounder-construction engine that certifies every
formula against a long regression.
"""

from .benchmarking import (
    BenchmarkMoments,
    BenchmarkResult,
    BenchmarkSpec,
    benchmark_moments,
    benchmark_worst,
    critical_delta,
    natural_from_benchmark,
)
from .confounders import ConfounderTarget, construct_confounder, construct_confounder_blocks
from .errors import BkSensError
from .inference import BootstrapPlan, bootstrap_moments, bootstrap_se, effect_report
from .linalg import ols_fit, partial_r2, r_matrix, residualize, sym_sqrt
from .mediation import (
    EffectReport,
    MediationData,
    MediationMoments,
    NaturalSensitivity,
    direct_adjusted,
    direct_randomized,
    direct_sample_classical,
    fit_observed,
    indirect_adjusted_difference,
    indirect_adjusted_product,
    indirect_randomized,
    indirect_sample_classical,
    observed_indirect,
)
from .optimize import direct_optimize
from .ovb import OvbMoments, adjust_scalar_u, adjust_vector_u, cov_u_update, ovb_moments
from .robustness import (
    RVReport,
    min_t_direct,
    min_t_indirect,
    robustness_value,
    rv_estimate_only,
)
from .simulation import S4Design, rv_ratio_study, simulate_design

__version__ = "0.1.0"

__all__ = [
    "BenchmarkMoments", "BenchmarkResult", "BenchmarkSpec", "BkSensError",
    "BootstrapPlan", "ConfounderTarget", "EffectReport", "MediationData",
    "MediationMoments", "NaturalSensitivity", "OvbMoments", "RVReport",
    "S4Design", "adjust_scalar_u", "adjust_vector_u", "benchmark_moments",
    "benchmark_worst", "bootstrap_moments", "bootstrap_se",
    "construct_confounder", "construct_confounder_blocks", "cov_u_update",
    "critical_delta", "direct_adjusted", "direct_optimize", "direct_randomized",
    "direct_sample_classical", "effect_report", "fit_observed",
    "indirect_adjusted_difference", "indirect_adjusted_product",
    "indirect_randomized", "indirect_sample_classical", "min_t_direct",
    "min_t_indirect", "natural_from_benchmark", "observed_indirect", "ols_fit",
    "ovb_moments", "partial_r2", "r_matrix", "residualize", "robustness_value",
    "rv_estimate_only", "rv_ratio_study", "simulate_design", "sym_sqrt",
]
