"""Extreme value mixture models, GARCH filtering and tail-risk estimation."""

from .distributions import (
    BulkFamily,
    Gamma,
    GevParams,
    GpdParams,
    Gumbel,
    Kernel,
    LogNormal,
    Normal,
    ReverseWeibull,
    StudentT,
    Weibull,
    dist_eval,
    gev_cdf,
    gev_pdf,
    gpd_cdf,
    gpd_pdf,
    gpd_quantile,
    sample,
)
from .errors import (
    DegenerateSampleError,
    InfeasibleError,
    InvalidParameterError,
    NoJunctionError,
    NonConvergenceError,
    NonIntegrableTailError,
    SupportViolationError,
    TailmixError,
    TooFewBlocksError,
    TooFewExceedancesError,
)
from .mixture import (
    BULK_BASED,
    BulkBased,
    FittedMixture,
    MixtureSpec,
    Parameterized,
    hybrid_junction,
    hybrid_pareto_con_spec,
    hybrid_pareto_spec,
    mixture_cdf,
    mixture_logpdf,
    mixture_pdf,
    mixture_quantile,
    solve_continuity,
)
from .estimation import (
    FitReport,
    OptimizerConfig,
    ThresholdSearchConfig,
    fit_gev_blocks,
    fit_gpd,
    fit_mixture,
    kde_cv_bandwidth,
)
from .timeseries import (
    GarchFit,
    GarchParams,
    PriceSeries,
    ReturnSeries,
    acf,
    describe,
    fit_garch11,
    garch_filter,
    garch_forecast1,
    loss_series,
    to_returns,
    two_step_fit,
)
from .risk import (
    RiskLevel,
    RiskReport,
    es_empirical,
    es_numeric,
    es_monte_carlo,
    risk_report,
    two_step_var_es,
    var_empirical,
    var_model,
    var_monte_carlo,
)
from .diagnostics import MrlPoint, StabilityPoint, mean_residual_life, threshold_stability
from .simulation import (
    CopulaConfig,
    PopulationSpec,
    RmseTable,
    StudyConfig,
    rmse,
    run_study,
    sample_population,
    true_quantile,
)

__version__ = "0.1.0"
