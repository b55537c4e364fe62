"""Figure-level analyses: estimated-h PDFs, trajectory error growth, and
95 percent uncertainty reports, plus the per-experiment driver that ties
dataset, models, and metrics together for the CLI.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import Dataset, ExperimentConfig, ParameterPrior, sample_parameters
from .estimators import GPRegressor, LinearRegressor, MLPRegressor
from .exceptions import ConfigurationError, InvalidStateError
from .lorenz96 import L96Params, L96State, integrate_many, random_initial_state
from .metrics import Histogram, MetricRow, bhattacharyya, histogram, point_metrics

__all__ = [
    "PdfComparison",
    "ErrorGrowthSeries",
    "UncertaintyReport",
    "ExperimentResult",
    "estimate_h_pdf",
    "error_growth",
    "uncertainty_report",
    "run_experiment",
    "write_pdf_csv",
    "write_error_growth_csv",
    "write_uncertainty_csv",
    "write_metrics_csv",
]

# tags for auxiliary RNG streams derived from the master seed; large
# constants so they never collide with (master_seed, sim_index) children
_TAG_PDF = 1_000_003
_TAG_ERROR_GROWTH = 1_000_019
_TAG_MLP = 1_000_033

_MODEL_ORDER = ("gp", "mlp", "lr")

# posterior draws per test point for the GP histogram
_PDF_SAMPLES_PER_POINT = 100
# posterior draws per test snapshot for the error-growth ensemble
_GROWTH_SAMPLES_PER_POINT = 10


@dataclass(frozen=True)
class PdfComparison:
    """True-vs-estimated h distributions over shared bin edges."""

    edges: np.ndarray
    density_true: np.ndarray
    densities: dict = field(repr=False)
    bhattacharyya: dict = field(repr=False)


@dataclass(frozen=True)
class ErrorGrowthSeries:
    """Mean absolute X1 deviation of an h-ensemble from the truth.

    ``mtu`` starts at exactly 0 where the error is exactly 0 (identical
    initial conditions).
    """

    mtu: np.ndarray
    error: np.ndarray

    def __post_init__(self):
        if len(self.mtu) != len(self.error):
            raise InvalidStateError("mtu and error lengths differ")
        if self.mtu[0] != 0.0 or self.error[0] != 0.0:
            raise InvalidStateError("series must start at (0, 0)")


@dataclass(frozen=True)
class UncertaintyReport:
    """Per-test-point 95 percent bounds and their empirical coverage."""

    true_h: np.ndarray
    mean: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    coverage: float


@dataclass(frozen=True)
class ExperimentResult:
    """Everything one experiment run produces before serialization."""

    config: ExperimentConfig
    prior: ParameterPrior
    metrics: dict
    pdf: PdfComparison
    growth: dict
    uncertainty: UncertaintyReport | None
    gp_hyper: dict | None


def _prior_edges(dataset: Dataset, bins: int) -> np.ndarray:
    prior = dataset.manifest["prior"]
    lo, hi = prior["h_low"], prior["h_high"]
    if lo == hi:
        # degenerate point prior; widen so binning stays well defined
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def estimate_h_pdf(
    gp: GPRegressor | None,
    baseline_models: dict,
    dataset: Dataset,
    bins: int = 20,
    rng=None,
) -> PdfComparison:
    """Compare the true h distribution against each model's estimate.

    The true histogram bins the test-split targets. The GP histogram
    pools posterior samples (100 per test point); baseline histograms bin
    point predictions. All histograms share edges spanning the prior
    support, so Bhattacharyya distances are comparable across models.
    """
    if len(dataset.test_targets) == 0:
        raise InvalidStateError("test split is empty")
    edges = _prior_edges(dataset, bins)
    true_hist = histogram(dataset.test_targets, edges)
    densities = {}
    distances = {}
    if gp is not None:
        draws = gp.sample_y(
            dataset.test_features, n_samples=_PDF_SAMPLES_PER_POINT, random_state=rng
        )
        gp_hist = histogram(draws.ravel(), edges)
        densities["gp"] = gp_hist.density
        distances["gp"] = bhattacharyya(gp_hist, true_hist)
    for name, model in baseline_models.items():
        hist = histogram(model.predict(dataset.test_features), edges)
        densities[name] = hist.density
        distances[name] = bhattacharyya(hist, true_hist)
    return PdfComparison(
        edges=edges,
        density_true=true_hist.density,
        densities=densities,
        bhattacharyya=distances,
    )


def error_growth(
    true_params: L96Params,
    init: L96State,
    h_estimates,
    horizon_mtu: float = 2.0,
    dt: float = 0.005,
) -> ErrorGrowthSeries:
    """Error growth of an estimated-h ensemble against the true trajectory.

    The truth integrates ``init`` under ``true_params``; each ensemble
    member starts from the same full state with h replaced. The error at
    each sampled time (every 0.1 MTU, 1 MTU = 1/dt steps) is the mean
    over the ensemble of |X1_pred - X1_true|.
    """
    h_estimates = np.asarray(h_estimates, dtype=float).ravel()
    if len(h_estimates) == 0:
        raise InvalidStateError("h_estimates must be nonempty")
    if not horizon_mtu > 0:
        raise InvalidStateError("horizon must be positive")
    init.require_conforms(true_params)
    steps_per_mtu = 1.0 / dt
    stride = 0.1 * steps_per_mtu
    if abs(stride - round(stride)) > 1e-9:
        raise ConfigurationError("0.1 MTU must be a whole number of steps")
    stride = int(round(stride))
    n_steps = int(round(horizon_mtu * steps_per_mtu))
    packed = init.packed()
    rows = np.vstack([packed] * (1 + len(h_estimates)))
    hs = np.concatenate([[true_params.h], h_estimates])
    _, series, _ = integrate_many(rows, true_params, hs, dt, n_steps, record_series=0)
    sample_cols = np.arange(0, n_steps + 1, stride)
    truth = series[0, sample_cols]
    ensemble = series[1:, sample_cols]
    err = np.mean(np.abs(ensemble - truth[None, :]), axis=0)
    return ErrorGrowthSeries(mtu=sample_cols * dt, error=err)


def uncertainty_report(gp: GPRegressor, dataset: Dataset) -> UncertaintyReport:
    """One row of 95 percent bounds per test point plus coverage."""
    if len(dataset.test_targets) == 0:
        raise InvalidStateError("test split is empty")
    pred = gp.predict_interval(dataset.test_features)
    y = dataset.test_targets
    covered = (y >= pred.lower95) & (y <= pred.upper95)
    return UncertaintyReport(
        true_h=y,
        mean=pred.mean,
        lower95=pred.lower95,
        upper95=pred.upper95,
        coverage=float(np.mean(covered)),
    )


def _tagged_rng(master_seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, tag)))


def _tagged_seed(master_seed: int, tag: int) -> int:
    return int(np.random.SeedSequence((master_seed, tag)).generate_state(1)[0])


def _holdout_initials(config: ExperimentConfig, prior: ParameterPrior):
    """Re-derive (true h, initial state) for each held-out simulation from
    its child seed, exactly as dataset generation drew them."""
    params = L96Params(
        K=config.K, J=config.J, F=config.F, b=prior.b_value, c=prior.c_value, h=0.0
    )
    out = []
    for s in range(config.n_sims - config.holdout_sims, config.n_sims):
        rng = np.random.default_rng(np.random.SeedSequence((config.master_seed, s)))
        _, _, h = sample_parameters(prior, rng)
        state = random_initial_state(params, rng)
        out.append((h, state))
    return params, out


def run_experiment(
    config: ExperimentConfig,
    prior: ParameterPrior,
    dataset: Dataset,
    models=("gp", "mlp", "lr"),
    bins: int = 20,
    horizon_mtu: float = 2.0,
    gp_params: dict | None = None,
    mlp_params: dict | None = None,
) -> ExperimentResult:
    """Fit the requested models and produce metrics and figure series.

    Models are fitted on the train split and evaluated on the test split.
    Error growth restarts each held-out simulation from its original
    initial condition: the GP contributes posterior draws around each test
    snapshot, the baselines their point predictions, and the series is
    averaged over held-out simulations in index order.
    """
    models = tuple(models)
    unknown = set(models) - set(_MODEL_ORDER)
    if unknown:
        raise ConfigurationError(f"unknown models: {sorted(unknown)}")
    models = tuple(m for m in _MODEL_ORDER if m in models)
    if not models:
        raise ConfigurationError("at least one model required")

    fitted = {}
    if "gp" in models:
        fitted["gp"] = GPRegressor(**(gp_params or {})).fit(
            dataset.train_features, dataset.train_targets
        )
    if "mlp" in models:
        params = dict(mlp_params or {})
        params.setdefault("random_state", _tagged_seed(config.master_seed, _TAG_MLP))
        fitted["mlp"] = MLPRegressor(**params).fit(
            dataset.train_features, dataset.train_targets
        )
    if "lr" in models:
        fitted["lr"] = LinearRegressor().fit(
            dataset.train_features, dataset.train_targets
        )

    pdf = estimate_h_pdf(
        fitted.get("gp"),
        {m: fitted[m] for m in models if m != "gp"},
        dataset,
        bins=bins,
        rng=_tagged_rng(config.master_seed, _TAG_PDF),
    )

    rows = {}
    for name in models:
        pm = point_metrics(
            dataset.test_targets, fitted[name].predict(dataset.test_features)
        )
        rows[name] = MetricRow(
            mse=pm["mse"],
            mae=pm["mae"],
            r2=pm["r2"],
            bhattacharyya=pdf.bhattacharyya[name],
            pearson=pm["pearson"],
        )

    growth = _growth_by_model(config, prior, dataset, fitted, horizon_mtu)

    report = (
        uncertainty_report(fitted["gp"], dataset) if "gp" in fitted else None
    )
    gp_hyper = None
    if "gp" in fitted:
        hyper = fitted["gp"].hyper_
        gp_hyper = {
            "lengthscale": hyper.lengthscale,
            "signal_variance": hyper.signal_variance,
            "noise_variance": hyper.noise_variance,
            "log_marginal_likelihood": fitted["gp"].lml_,
        }
    return ExperimentResult(
        config=config,
        prior=prior,
        metrics=rows,
        pdf=pdf,
        growth=growth,
        uncertainty=report,
        gp_hyper=gp_hyper,
    )


def _growth_by_model(config, prior, dataset, fitted, horizon_mtu):
    params, holdout = _holdout_initials(config, prior)
    per = config.snapshots_per_sim
    rng = _tagged_rng(config.master_seed, _TAG_ERROR_GROWTH)
    sums = {}
    mtu = None
    for ti, (h_true, state) in enumerate(holdout):
        sim_params = L96Params(
            K=params.K, J=params.J, F=params.F, b=params.b, c=params.c, h=h_true
        )
        snaps = dataset.test_features[ti * per : (ti + 1) * per]
        for name, model in fitted.items():
            if name == "gp":
                draws = model.sample_y(
                    snaps, n_samples=_GROWTH_SAMPLES_PER_POINT, random_state=rng
                )
                estimates = draws.ravel()
            else:
                estimates = model.predict(snaps)
            series = error_growth(
                sim_params, state, estimates, horizon_mtu=horizon_mtu, dt=config.dt
            )
            mtu = series.mtu
            sums[name] = sums.get(name, 0.0) + series.error
    n = len(holdout)
    return {
        name: ErrorGrowthSeries(mtu=mtu, error=total / n)
        for name, total in sums.items()
    }


def _fmt(v) -> str:
    return repr(float(v))


def write_metrics_csv(path, metrics: dict) -> None:
    """One row per model: model, mse, mae, r2, bhattacharyya, pearson."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "mse", "mae", "r2", "bhattacharyya", "pearson"])
        for name in _MODEL_ORDER:
            if name not in metrics:
                continue
            row = metrics[name]
            writer.writerow(
                [name] + [_fmt(v) for v in (row.mse, row.mae, row.r2,
                                            row.bhattacharyya, row.pearson)]
            )


def write_pdf_csv(path, pdf: PdfComparison) -> None:
    """Columns: bin_center, density_true, then density_<model>."""
    centers = 0.5 * (pdf.edges[:-1] + pdf.edges[1:])
    names = [m for m in _MODEL_ORDER if m in pdf.densities]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["bin_center", "density_true"] + [f"density_{m}" for m in names]
        )
        for i, center in enumerate(centers):
            writer.writerow(
                [_fmt(center), _fmt(pdf.density_true[i])]
                + [_fmt(pdf.densities[m][i]) for m in names]
            )


def write_error_growth_csv(path, growth: dict) -> None:
    """Columns: mtu, then err_<model> sharing one time axis."""
    names = [m for m in _MODEL_ORDER if m in growth]
    if not names:
        raise InvalidStateError("no growth series to write")
    mtu = growth[names[0]].mtu
    for name in names[1:]:
        if not np.array_equal(growth[name].mtu, mtu):
            raise InvalidStateError("growth series time axes differ")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mtu"] + [f"err_{m}" for m in names])
        for i, t in enumerate(mtu):
            writer.writerow(
                [_fmt(t)] + [_fmt(growth[m].error[i]) for m in names]
            )


def write_uncertainty_csv(path, report: UncertaintyReport) -> None:
    """Columns: index, true_h, mean, lower95, upper95."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "true_h", "mean", "lower95", "upper95"])
        for i in range(len(report.true_h)):
            writer.writerow(
                [i]
                + [
                    _fmt(v)
                    for v in (
                        report.true_h[i],
                        report.mean[i],
                        report.lower95[i],
                        report.upper95[i],
                    )
                ]
            )
