"""Generalised Score Distribution tools for 5-level subjective responses."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    GsdParams,
    ProbitParams,
    SliParams,
    VarianceBounds,
    discretized_normal_pmf,
    gsd_moments,
    gsd_pmf,
    parameter_space_map,
    rho_from_variance,
    sample,
    variance_bounds,
)
from .estimation import (  # noqa: E402
    FitResult,
    corrected_empirical_pmf,
    fit_gsd,
    fit_probit,
    fit_sli,
    log_likelihood,
    p_max,
    sigma_floor,
)
from .gof import GofResult, PPPlotData, bootstrap_gof, g_statistic, pp_plot, pvalue_histogram  # noqa: E402
from .bootstrap_eval import ComparisonResult, compare_vs_empirical, comparison_ci, w_statistic  # noqa: E402
from .dataio import Dataset, RunConfig, derive_stream, load_responses, write_results  # noqa: E402
