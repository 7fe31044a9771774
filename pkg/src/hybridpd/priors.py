"""Algebraic prior families with learnable parameters and a constant offset.

Each form exposes two evaluation surfaces:

* ``eval_known(theta, xk)``    -- from the known-feature projection only,
  used when fitting the prior to proxy targets (partial dependence pairs).
* ``eval_state(theta, state)`` -- from the full feature/state row, used for
  prediction, integration and the prior-quality metric.

Both have tape-building ``*_ad`` twins so the same code path serves gradient
descent. The offset gamma lives outside the form: it expands to output
components through ``gamma_matrix`` (structurally exact components, like the
identity row of the pendulum, keep no offset).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError


class PriorForm:
    form_id = "base"
    known_indices: tuple = ()
    n_params: int = 0
    output_dim: int = 1
    gamma_dim: int = 1

    @property
    def gamma_matrix(self):
        """(output_dim, gamma_dim) expansion of the offset vector."""
        return np.ones((1, 1))

    @property
    def fit_mask(self):
        """Output components fit against partial-dependence targets."""
        return np.ones(self.output_dim, dtype=bool)

    def init_theta(self, rng):
        return rng.standard_normal(self.n_params)

    def init_gamma(self, rng):
        return rng.standard_normal(self.gamma_dim)

    # numpy surfaces -------------------------------------------------------
    def eval_known(self, theta, xk):
        return self.eval_known_ad(ad.Var(np.asarray(theta, dtype=np.float64)),
                                  np.asarray(xk, dtype=np.float64)).data

    def eval_state(self, theta, state):
        return self.eval_state_ad(ad.Var(np.asarray(theta, dtype=np.float64)),
                                  ad.as_var(np.asarray(state, dtype=np.float64))).data

    # tape surfaces ----------------------------------------------------------
    def eval_known_ad(self, theta, xk):
        raise NotImplementedError

    def eval_state_ad(self, theta, state):
        """Default: project the known columns out of the state rows."""
        state = ad.as_var(state)
        cols = list(self.known_indices)
        return self.eval_known_ad(theta, state[:, cols])


class LinearForm(PriorForm):
    """theta . x_k, one coefficient per known feature."""

    form_id = "linear"

    def __init__(self, known_indices):
        self.known_indices = tuple(int(i) for i in known_indices)
        self.n_params = len(self.known_indices)

    def eval_known_ad(self, theta, xk):
        xk = ad.as_var(xk)
        return ad.matmul(xk, ad.reshape(theta, (self.n_params, 1)))


class SineProductForm(PriorForm):
    """theta0 * sin(theta1 * x_a * x_b) on two known features."""

    form_id = "sine_product"
    n_params = 2

    def __init__(self, known_indices=(0, 1)):
        if len(known_indices) != 2:
            raise ConfigurationError("sine_product reads exactly two features")
        self.known_indices = tuple(int(i) for i in known_indices)

    def eval_known_ad(self, theta, xk):
        xk = ad.as_var(xk)
        z = xk[:, 0:1] * xk[:, 1:2]
        return theta[0] * ad.sin(theta[1] * z)


class QuadraticForm(PriorForm):
    """theta0 * x_k^2 on a single known feature."""

    form_id = "quadratic"
    n_params = 1

    def __init__(self, known_indices=(0,)):
        if len(known_indices) != 1:
            raise ConfigurationError("quadratic reads exactly one feature")
        self.known_indices = tuple(int(i) for i in known_indices)

    def eval_known_ad(self, theta, xk):
        xk = ad.as_var(xk)
        return theta[0] * (xk[:, 0:1] ** 2.0)


class LotkaVolterraForm(PriorForm):
    """Prey equation prior on log-states (p, q): dp/dt part is -theta * e^q."""

    form_id = "lotka_volterra_prior"
    known_indices = (1,)
    n_params = 1
    output_dim = 2
    gamma_dim = 2

    @property
    def gamma_matrix(self):
        return np.eye(2)

    def eval_known_ad(self, theta, xk):
        xk = ad.as_var(xk)
        first = (-1.0 * theta[0]) * ad.exp(xk[:, 0:1])
        zeros = ad.Var(np.zeros_like(first.data))
        return ad.concat([first, zeros], axis=1)


class PendulumForm(PriorForm):
    """Frictionless pendulum prior: (omega, -theta * sin(angle)).

    The first row is the exact structural identity d(angle)/dt = omega: it
    carries no parameters, keeps no offset, and is excluded from
    partial-dependence fitting (it cannot be evaluated from x_k = angle).
    """

    form_id = "pendulum_prior"
    known_indices = (0,)
    n_params = 1
    output_dim = 2
    gamma_dim = 1

    @property
    def gamma_matrix(self):
        return np.array([[0.0], [1.0]])

    @property
    def fit_mask(self):
        return np.array([False, True])

    def eval_known_ad(self, theta, xk):
        xk = ad.as_var(xk)
        second = (-1.0 * theta[0]) * ad.sin(xk[:, 0:1])
        zeros = ad.Var(np.zeros_like(second.data))
        return ad.concat([zeros, second], axis=1)

    def eval_state_ad(self, theta, state):
        state = ad.as_var(state)
        first = state[:, 1:2]
        second = (-1.0 * theta[0]) * ad.sin(state[:, 0:1])
        return ad.concat([first, second], axis=1)


class ReactionDiffusionForm(PriorForm):
    """Two-channel diffusion prior (theta_u * lap(u), theta_v * lap(v)).

    States are channel-first fields flattened to (2 * H * W) rows; the
    Laplacian is the 5-point stencil with circular boundary, scaled by
    1/dx^2. The offset is one constant per channel.
    """

    form_id = "reaction_diffusion_prior"
    n_params = 2
    gamma_dim = 2

    def __init__(self, grid_shape=(32, 32), dx=None):
        self.grid_shape = (int(grid_shape[0]), int(grid_shape[1]))
        h, w = self.grid_shape
        self.dx = float(dx) if dx is not None else 2.0 / w
        self.output_dim = 2 * h * w
        self.known_indices = tuple(range(self.output_dim))

    @property
    def gamma_matrix(self):
        h, w = self.grid_shape
        m = np.zeros((2 * h * w, 2))
        m[: h * w, 0] = 1.0
        m[h * w:, 1] = 1.0
        return m

    @property
    def fit_mask(self):
        return np.ones(self.output_dim, dtype=bool)

    def init_theta(self, rng):
        # explicit integration of theta * lap is only stable for
        # theta << dx^2 / (4 dt); a unit-scale draw explodes immediately
        return rng.uniform(0.0, 0.01, size=2)

    def init_gamma(self, rng):
        return rng.normal(0.0, 0.1, size=2)

    def _laplacian(self, fields):
        # fields: (N, C, H, W); stencil over the trailing spatial axes
        return ad.laplacian5_circular(fields, 1.0 / self.dx ** 2)

    def eval_known_ad(self, theta, xk):
        return self.eval_state_ad(theta, xk)

    def eval_state_ad(self, theta, state):
        state = ad.as_var(state)
        h, w = self.grid_shape
        n = state.data.shape[0]
        fields = ad.reshape(state, (n, 2, h, w))
        lap = self._laplacian(fields)
        scale = ad.concat([ad.reshape(theta[0], (1, 1, 1, 1)),
                           ad.reshape(theta[1], (1, 1, 1, 1))], axis=1)
        return ad.reshape(lap * scale, (n, self.output_dim))


@dataclass
class Prior:
    """A form bound to fitted parameter values."""

    form: PriorForm
    theta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=np.float64))
        if self.theta.shape != (self.form.n_params,):
            raise ConfigurationError(
                f"theta shape {self.theta.shape} != ({self.form.n_params},)")
        if self.gamma.shape != (self.form.gamma_dim,):
            raise ConfigurationError(
                f"gamma shape {self.gamma.shape} != ({self.form.gamma_dim},)")

    @property
    def gamma_scalar(self):
        return float(self.gamma[0])

    def gamma_row(self):
        """Offset expanded to one output row."""
        return self.form.gamma_matrix @ self.gamma

    def predict_known(self, xk, include_gamma=True):
        out = self.form.eval_known(self.theta, xk)
        if include_gamma:
            out = out + self.gamma_row()
        return out

    def predict_state(self, state, include_gamma=True):
        out = self.form.eval_state(self.theta, state)
        if include_gamma:
            out = out + self.gamma_row()
        return out

    def copy(self):
        return Prior(self.form, self.theta.copy(), self.gamma.copy())
