"""chaosid: coupling-parameter identification for the two-level
Lorenz-96 system.

Simulate the chaotic slow-fast system, carve regime-windowed snapshot
datasets out of the X1 series, and estimate the coupling strength h with
exact Gaussian-process regression (with calibrated uncertainty) against
linear-regression and neural-network baselines.
"""

__version__ = "0.1.0"

from .analysis import (
    ErrorGrowthSeries,
    ExperimentResult,
    PdfComparison,
    UncertaintyReport,
    error_growth,
    estimate_h_pdf,
    run_experiment,
    uncertainty_report,
)
from .baselines import (
    LinearModel,
    MLPModel,
    TrainConfig,
    fit_linear,
    mlp_forward,
    mlp_gradients,
    predict_linear,
    train_mlp,
)
from .datagen import (
    Dataset,
    ExperimentConfig,
    ParameterPrior,
    Regime,
    experiment_grid,
    extract_snapshots,
    generate_dataset,
    load_dataset,
    regime_window,
    sample_parameters,
    save_dataset,
)
from .estimators import GPRegressor, LinearRegressor, MLPRegressor
from .exceptions import ChaosidError
from .gp import (
    GPModel,
    Prediction,
    SEHyperparams,
    SearchBudget,
    kernel_matrix,
    log_marginal_likelihood,
    optimize_hyperparameters,
    sample_posterior,
    se_kernel,
)
from .gp import fit as fit_gp
from .gp import predict as predict_gp
from .lorenz96 import (
    L96Params,
    L96State,
    Trajectory,
    integrate,
    integrate_many,
    l96_derivative,
    l96_ybar,
    random_initial_state,
    rk4_step,
)
from .metrics import Histogram, MetricRow, bhattacharyya, histogram, point_metrics

__all__ = [
    "__version__",
    "ChaosidError",
    "L96Params",
    "L96State",
    "Trajectory",
    "l96_ybar",
    "l96_derivative",
    "rk4_step",
    "integrate",
    "integrate_many",
    "random_initial_state",
    "Regime",
    "ExperimentConfig",
    "ParameterPrior",
    "Dataset",
    "experiment_grid",
    "sample_parameters",
    "regime_window",
    "extract_snapshots",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "SEHyperparams",
    "GPModel",
    "Prediction",
    "SearchBudget",
    "se_kernel",
    "kernel_matrix",
    "fit_gp",
    "predict_gp",
    "log_marginal_likelihood",
    "optimize_hyperparameters",
    "sample_posterior",
    "LinearModel",
    "MLPModel",
    "TrainConfig",
    "fit_linear",
    "predict_linear",
    "mlp_forward",
    "mlp_gradients",
    "train_mlp",
    "Histogram",
    "MetricRow",
    "point_metrics",
    "histogram",
    "bhattacharyya",
    "PdfComparison",
    "ErrorGrowthSeries",
    "UncertaintyReport",
    "ExperimentResult",
    "estimate_h_pdf",
    "error_growth",
    "uncertainty_report",
    "run_experiment",
    "GPRegressor",
    "LinearRegressor",
    "MLPRegressor",
]
