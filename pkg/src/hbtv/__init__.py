"""Online parameter estimation with heavy-ball momentum and a time-varying gain."""

from .analysis import (
    PeReport,
    RateConstants,
    check_bounds,
    exp_rate_fit,
    f_max_bound,
    f_min_bound,
    inverse_gain_update,
    lyapunov_value,
    pe_metrics,
    rate_constants,
)
from .estimators import (
    HbConstEstimator,
    HbTvEstimator,
    HbTvHyper,
    NgdEstimator,
    RlsFfEstimator,
    eta_lower_bound,
    hb_const_step,
    hbtv_step,
    ngd_step,
    rlsff_step,
    validate_hyperparameters,
)
from .harness import ExperimentConfig, Trace, compare, load_config, parse_config, run
from .plant import PlantModel, RegressionProblem, benchmark_plant, from_transfer_function, simulate
from .signals import Signal, decaying_multisine, pe_multisine

__version__ = "0.1.0"
