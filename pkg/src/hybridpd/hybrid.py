"""Uniform residual-model interface and the additive hybrid model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import trees
from .errors import ConfigurationError
from .nets import Adam, Mlp, MlpSpec, fit_regression
from .priors import Prior


def apply_filter(x, input_filter):
    if not input_filter:
        return x
    keep = [j for j in range(x.shape[1]) if j not in set(input_filter)]
    if not keep:
        raise ConfigurationError("input filter removes every feature")
    return x[:, keep]


class ResidualModel:
    """fit/predict surface shared by every residual kind.

    ``input_filter`` lists original feature indices the model must never
    see; they are dropped before fitting and prediction, so perturbing them
    cannot change the output.
    """

    kind = "base"
    differentiable = False

    def __init__(self, input_filter=None, seed=0):
        self.input_filter = tuple(sorted(input_filter)) if input_filter else ()
        self.seed = int(seed)

    def _x(self, x):
        return apply_filter(np.asarray(x, dtype=np.float64), self.input_filter)

    def fit(self, x, y, x_val=None, y_val=None):
        raise NotImplementedError

    def fit_epochs(self, x, y, n_epochs):
        """Incremental training for nets; tree models refit from scratch."""
        raise NotImplementedError

    def predict(self, x):
        raise NotImplementedError

    def get_state(self):
        """Snapshot of everything predict() depends on."""
        return None

    def set_state(self, state):
        return None


class MlpResidual(ResidualModel):
    kind = "mlp"
    differentiable = True

    def __init__(self, input_dim, hidden_layers=2, width=15, epochs=3000,
                 lr=0.005, input_filter=None, seed=0):
        super().__init__(input_filter, seed)
        eff_dim = input_dim - len(self.input_filter)
        self.spec = MlpSpec(input_dim=eff_dim, output_dim=1,
                            hidden_layers=hidden_layers, width=width)
        self.epochs = epochs
        self.lr = lr
        self._fit_count = 0
        self.net = Mlp(self.spec, seed=self._derived_seed())
        self._opt = Adam(lr=self.lr)

    def _derived_seed(self):
        rng = np.random.default_rng([self.seed, 0x666974, self._fit_count])
        return int(rng.integers(2 ** 31))

    def reset(self):
        """Fresh weights for every complete fit: repeated refits (PD rounds)
        then average over independent initialization error instead of
        re-entrenching one draw's bias. Deterministic via the fit counter."""
        self._fit_count += 1
        self.net = Mlp(self.spec, seed=self._derived_seed())
        self._opt = Adam(lr=self.lr)

    def fit(self, x, y, x_val=None, y_val=None):
        self.reset()
        xv = self._x(x_val) if x_val is not None else None
        fit_regression(self.net, self._x(x), y, epochs=self.epochs,
                       optimizer=self._opt, x_val=xv, y_val=y_val)

    def fit_epochs(self, x, y, n_epochs):
        fit_regression(self.net, self._x(x), y, epochs=n_epochs, optimizer=self._opt)

    def predict(self, x):
        return self.net.predict(self._x(x))[:, 0]

    def get_params(self):
        return self.net.get_params()

    def set_params(self, values):
        self.net.set_params(values)

    def get_state(self):
        return self.net.get_params()

    def set_state(self, state):
        self.net.set_params(state)


class GbResidual(ResidualModel):
    kind = "gradient_boosting"

    def __init__(self, n_trees=700, max_depth=2, shrinkage=0.1,
                 min_samples_split=2, input_filter=None, seed=0):
        super().__init__(input_filter, seed)
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.shrinkage = shrinkage
        self.min_samples_split = min_samples_split
        self.model = None

    def fit(self, x, y, x_val=None, y_val=None):
        self.model = trees.fit_gb(self._x(x), y, self.n_trees, self.max_depth,
                                  seed=self.seed, shrinkage=self.shrinkage,
                                  min_samples_split=self.min_samples_split)

    def fit_epochs(self, x, y, n_epochs):
        self.fit(x, y)

    def predict(self, x):
        if self.model is None:
            raise ConfigurationError("residual model not fitted")
        return self.model.predict(self._x(x))

    def get_state(self):
        return self.model

    def set_state(self, state):
        self.model = state


class RfResidual(ResidualModel):
    kind = "random_forest"

    def __init__(self, n_trees=500, min_samples_split=5, max_depth=None,
                 input_filter=None, seed=0):
        super().__init__(input_filter, seed)
        self.n_trees = n_trees
        self.min_samples_split = min_samples_split
        self.max_depth = max_depth
        self.model = None

    def fit(self, x, y, x_val=None, y_val=None):
        self.model = trees.fit_rf(self._x(x), y, self.n_trees,
                                  self.min_samples_split, seed=self.seed,
                                  max_depth=self.max_depth)

    def fit_epochs(self, x, y, n_epochs):
        self.fit(x, y)

    def predict(self, x):
        if self.model is None:
            raise ConfigurationError("residual model not fitted")
        return self.model.predict(self._x(x))

    def get_state(self):
        return self.model

    def set_state(self, state):
        self.model = state


class ZeroResidual(ResidualModel):
    """Predicts zero everywhere; reduces hybrids to prior-only fitting."""

    kind = "zero"

    def fit(self, x, y, x_val=None, y_val=None):
        return None

    def fit_epochs(self, x, y, n_epochs):
        return None

    def predict(self, x):
        return np.zeros(np.asarray(x).shape[0])


RESIDUAL_KINDS = {
    "mlp": MlpResidual,
    "gb": GbResidual,
    "gradient_boosting": GbResidual,
    "rf": RfResidual,
    "random_forest": RfResidual,
    "zero": ZeroResidual,
}


@dataclass
class HybridModel:
    """prediction(x) = prior(x_k) + gamma + residual(x)."""

    prior: Prior | None
    residual: ResidualModel | None

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        parts = np.zeros(x.shape[0])
        if self.prior is not None:
            parts = parts + self.prior.predict_known(
                x[:, list(self.prior.form.known_indices)])[:, 0]
        if self.residual is not None:
            parts = parts + self.residual.predict(x)
        return parts
