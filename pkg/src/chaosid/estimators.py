"""Scikit-learn style estimator wrappers around the functional cores.

Each estimator follows the fit/predict contract with constructor-only
hyperparameters (so ``get_params``/``set_params``/``clone`` work), input
validation through the scikit-learn helpers, and trailing-underscore
fitted attributes guarded by ``check_is_fitted``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import baselines as _bl
from . import gp as _gp

__all__ = ["GPRegressor", "LinearRegressor", "MLPRegressor"]


class GPRegressor(RegressorMixin, BaseEstimator):
    """Exact Gaussian-process regression with a squared-exponential kernel.

    Parameters
    ----------
    lengthscale, signal_variance, noise_variance : float
        Kernel hyperparameters; used as given when ``optimize`` is False,
        otherwise replaced by the marginal-likelihood optimum.
    optimize : bool
        Select hyperparameters by maximizing the log marginal likelihood.
    grid_size : int
        Per-axis resolution of the seeding grid.
    refine_evals : int
        Nelder-Mead evaluation budget after the grid.
    """

    def __init__(
        self,
        lengthscale=1.0,
        signal_variance=1.0,
        noise_variance=0.1,
        optimize=True,
        grid_size=5,
        refine_evals=200,
    ):
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.optimize = optimize
        self.grid_size = grid_size
        self.refine_evals = refine_evals

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.optimize and len(y) >= 2:
            hyper = _gp.optimize_hyperparameters(
                X,
                y,
                _gp.SearchBudget(
                    grid_size=self.grid_size, refine_evals=self.refine_evals
                ),
            )
        else:
            hyper = _gp.SEHyperparams(
                lengthscale=self.lengthscale,
                signal_variance=self.signal_variance,
                noise_variance=self.noise_variance,
            )
        self.model_ = _gp.fit(X, y, hyper)
        self.hyper_ = hyper
        self.lml_ = _gp.log_marginal_likelihood(self.model_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "model_")
        X = check_array(X)
        pred = _gp.predict(self.model_, X)
        if return_std:
            return pred.mean, np.sqrt(pred.variance)
        return pred.mean

    def predict_interval(self, X) -> _gp.Prediction:
        """Full per-point marginals (mean, variance, 95 percent bounds)."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return _gp.predict(self.model_, X)

    def sample_y(self, X, n_samples=1, random_state=None):
        """Draws from the per-point predictive marginals."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        rng = np.random.default_rng(random_state)
        return _gp.sample_posterior(self.model_, X, rng, n_samples)


class LinearRegressor(RegressorMixin, BaseEstimator):
    """Ordinary least squares via the normal equations (ridge fallback on
    ill-conditioned designs)."""

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.model_ = _bl.fit_linear(X, y)
        self.coef_ = self.model_.weights
        self.intercept_ = self.model_.bias
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return _bl.predict_linear(self.model_, X)


class MLPRegressor(RegressorMixin, BaseEstimator):
    """Small fully connected network (64, 32, 16, 8 hidden units) trained
    with mini-batch adaptive-moment descent.

    Parameters mirror :class:`chaosid.baselines.TrainConfig`.
    """

    def __init__(
        self,
        epochs=500,
        batch_size=32,
        step_size=1e-3,
        beta1=0.9,
        beta2=0.999,
        random_state=0,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        config = _bl.TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            step_size=self.step_size,
            beta1=self.beta1,
            beta2=self.beta2,
            seed=self.random_state,
        )
        self.model_, self.loss_curve_ = _bl.train_mlp(X, y, config)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return _bl.mlp_forward(self.model_, X)
