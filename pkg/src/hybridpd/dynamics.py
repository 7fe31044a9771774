"""Fixed-step ODE integration (plain and tape-building) and dynamic hybrids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, DivergenceError
from .priors import Prior


@dataclass(frozen=True)
class IntegratorCfg:
    method: str = "rk4"
    dt: float = 0.05
    substeps: int = 1

    def __post_init__(self):
        if self.method not in ("euler", "rk4"):
            raise ConfigurationError("method must be 'euler' or 'rk4'")
        if self.dt <= 0 or self.substeps < 1:
            raise ConfigurationError("dt must be > 0 and substeps >= 1")


def integrate(deriv, x0, cfg, n_steps):
    """Integrate dx/dt = deriv(x) from a batch of initial states.

    deriv maps (B, d) -> (B, d); returns (B, n_steps + 1, d) at the
    observation grid (cfg.dt apart, cfg.substeps internal steps per
    interval). Raises DivergenceError at the first non-finite state.
    """
    x = np.asarray(x0, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    out = np.empty((x.shape[0], n_steps + 1, x.shape[1]))
    out[:, 0] = x
    h = cfg.dt / cfg.substeps
    for step in range(1, n_steps + 1):
        for _ in range(cfg.substeps):
            if cfg.method == "euler":
                x = x + h * deriv(x)
            else:
                k1 = deriv(x)
                k2 = deriv(x + 0.5 * h * k1)
                k3 = deriv(x + 0.5 * h * k2)
                k4 = deriv(x + h * k3)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"integration diverged at step {step}", step=step)
        out[:, step] = x
    return out[0] if squeeze else out


def integrate_ad(deriv_ad, x0, cfg, n_steps):
    """Tape-building twin of ``integrate``: returns the list of state Vars
    after each observation step (initial state excluded)."""
    x = ad.as_var(x0)
    h = cfg.dt / cfg.substeps
    states = []
    for _ in range(n_steps):
        for _ in range(cfg.substeps):
            if cfg.method == "euler":
                x = x + h * deriv_ad(x)
            else:
                k1 = deriv_ad(x)
                k2 = deriv_ad(x + (0.5 * h) * k1)
                k3 = deriv_ad(x + (0.5 * h) * k2)
                k4 = deriv_ad(x + h * k3)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states.append(x)
    return states


class DynamicHybrid:
    """Additive dynamics: prior(x) + gamma + residual net(x).

    States are flat (B, d) rows; field-valued residuals (conv nets) reshape
    internally via ``grid_shape``.
    """

    def __init__(self, prior: Prior | None, net=None, grid_shape=None, channels=None):
        self.prior = prior
        self.net = net
        self.grid_shape = grid_shape
        self.channels = channels

    def net_params(self):
        return [] if self.net is None else self.net.params

    def _net_deriv(self, x):
        if self.grid_shape is None:
            return self.net.predict(x)
        b = x.shape[0]
        h, w = self.grid_shape
        fields = x.reshape(b, self.channels, h, w)  # states are channel-first
        return self.net.predict(fields).reshape(b, -1)

    def _net_deriv_ad(self, x):
        if self.grid_shape is None:
            return self.net.forward(x)
        b = x.data.shape[0]
        h, w = self.grid_shape
        fields = ad.reshape(x, (b, self.channels, h, w))
        return ad.reshape(self.net.forward(fields), (b, self.channels * h * w))

    def deriv(self, x):
        x = np.asarray(x, dtype=np.float64)
        total = np.zeros_like(x)
        if self.prior is not None:
            total = total + self.prior.predict_state(x)
        if self.net is not None:
            total = total + self._net_deriv(x)
        return total

    def deriv_ad(self, x, theta=None, gamma=None):
        """Tape dynamics; pass theta/gamma Vars to train the prior too."""
        total = None
        if self.prior is not None:
            th = theta if theta is not None else ad.Var(self.prior.theta)
            out = self.prior.form.eval_state_ad(th, x)
            gm = gamma if gamma is not None else ad.Var(self.prior.gamma)
            gmat = self.prior.form.gamma_matrix.T.astype(gm.data.dtype)
            offset = ad.matmul(ad.reshape(gm, (1, self.prior.form.gamma_dim)),
                               ad.Var(gmat))
            total = out + offset
        if self.net is not None:
            net_out = self._net_deriv_ad(x)
            total = net_out if total is None else total + net_out
        return total
