"""Evaluation metrics: generalization MSE, prior-approximation MSE, relative
parameter error, and trajectory MSE (plus its natural-log variant).

Vector-valued errors average over state components. Everything is computed
in float64; a non-finite metric raises instead of propagating NaN.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset, TrajectoryDataset
from .dynamics import integrate
from .errors import ConfigurationError


class MetricNaNError(RuntimeError):
    """A metric evaluated to NaN/Inf; the replicate must be aborted."""


def _check_finite(value, what):
    if not np.isfinite(value):
        raise MetricNaNError(f"{what} evaluated to {value!r}")
    return float(value)


def eval_d_hat(model, data: Dataset):
    """Mean squared error of model predictions against the targets."""
    if data.n < 1:
        raise ConfigurationError("empty dataset")
    pred = np.asarray(model.predict(data.features), dtype=np.float64).reshape(-1)
    if pred.shape[0] != data.n:
        raise ConfigurationError("prediction length mismatch")
    return _check_finite(np.mean((pred - data.targets) ** 2), "d_hat")


def eval_dk_hat(prior, truth, eval_points):
    """Mean squared gap between the fitted and true algebraic terms.

    The offset gamma is excluded on both sides. Static datasets evaluate at
    the observed x_k rows; trajectory datasets pool all observed states.
    """
    if prior.form.form_id != truth.form.form_id:
        raise ConfigurationError(
            f"prior forms differ: {prior.form.form_id} vs {truth.form.form_id}")
    if tuple(prior.form.known_indices) != tuple(truth.form.known_indices):
        raise ConfigurationError("priors read different known features")
    if isinstance(eval_points, TrajectoryDataset):
        states = eval_points.pooled_states()
    else:
        states = eval_points.features
    a = prior.predict_state(states, include_gamma=False)
    b = truth.predict_state(states, include_gamma=False)
    return _check_finite(np.mean((a - b) ** 2), "dk_hat")


def eval_rmae(theta_hat, theta_star):
    """Mean over components of |error| / |true|, in percent."""
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=np.float64))
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=np.float64))
    if theta_hat.shape != theta_star.shape:
        raise ConfigurationError("parameter vectors differ in length")
    if np.any(theta_star == 0.0):
        raise ConfigurationError("rMAE undefined for zero true components")
    return _check_finite(
        100.0 * np.mean(np.abs(theta_hat - theta_star) / np.abs(theta_star)), "rmae")


def eval_traj_mse(model, data: TrajectoryDataset, integrator_cfg):
    """Mean squared state error of re-integrated trajectories.

    Integrates the model from each test initial state over the full horizon
    and averages the squared error over trajectories, timesteps 1..T and
    state components. Divergence raises DivergenceError (never silent NaN).
    """
    deriv = model.deriv if hasattr(model, "deriv") else model
    x0 = data.trajectories[:, 0, :]
    pred = integrate(deriv, x0, integrator_cfg, data.horizon)
    err = pred[:, 1:, :] - data.trajectories[:, 1:, :]
    return _check_finite(np.mean(err * err), "traj_mse")


def eval_log_traj_mse(model, data, integrator_cfg):
    value = eval_traj_mse(model, data, integrator_cfg)
    if value <= 0.0:
        raise MetricNaNError("log of non-positive trajectory MSE")
    return float(np.log(value))
