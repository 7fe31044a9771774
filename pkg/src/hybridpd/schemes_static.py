"""Static hybrid training: prior-only, sequential, alternate, PD-based.

Every scheme returns the parameters that achieved the lowest validation MSE
among the coherent (prior, residual) stages it visited.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import Dataset
from .errors import ConfigurationError, DivergenceError
from .hybrid import HybridModel
from .nets import make_optimizer
from .partial_dependence import pd_dataset
from .priors import Prior


@dataclass
class PriorFitCfg:
    epochs: int = 2000
    lr: float = 0.005
    optimizer: str = "adam"
    seed: int = 0
    restarts: int = 3  # seeded re-draws of (theta, gamma); best train loss wins


@dataclass
class StageLog:
    """Validation trace across scheme stages (diagnostics only)."""

    val_losses: list = field(default_factory=list)
    best_stage: int = -1
    best_val: float = np.inf


def _prior_step(form, theta, gamma, gmat, xk, targets, cols):
    out = form.eval_known_ad(theta, xk)
    out = out + ad.matmul(ad.reshape(gamma, (1, form.gamma_dim)), gmat)
    if cols is not None:
        out = out[:, cols]
    return ad.mse(out, targets)


def _fit_prior_core(form, xk, targets, cfg: PriorFitCfg, init=None, fit_mask=None):
    """Run the gradient fit and hand back the live (theta, gamma, optimizer)
    so callers may continue optimizing from the exact same state.

    With a random initialization, cfg.restarts independent seeded draws are
    optimized and the one reaching the lowest final training loss wins
    (non-convex forms get trapped otherwise); an explicit init runs once.
    """
    xk = np.asarray(xk, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    cols = None
    if fit_mask is not None:
        cols = np.nonzero(np.asarray(fit_mask))[0]
        targets = targets[:, cols]
    gmat = ad.Var(form.gamma_matrix.T)
    n_starts = 1 if init is not None else max(1, cfg.restarts)

    best = None
    for start in range(n_starts):
        if init is None:
            rng = np.random.default_rng([int(cfg.seed), 0x70726921, start])
            theta0, gamma0 = form.init_theta(rng), form.init_gamma(rng)
        else:
            theta0 = np.asarray(init[0], float).copy()
            gamma0 = np.asarray(init[1], float).copy()
        theta = ad.Var(theta0, requires_grad=True)
        gamma = ad.Var(gamma0, requires_grad=True)
        opt = make_optimizer(cfg.optimizer, cfg.lr)
        loss_val = np.inf
        for epoch in range(cfg.epochs):
            loss = _prior_step(form, theta, gamma, gmat, xk, targets, cols)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise DivergenceError(f"prior fit diverged at epoch {epoch}",
                                      step=epoch)
            loss.backward()
            opt.step([theta, gamma])
        final = float(_prior_step(form, theta, gamma, gmat, xk, targets, cols).data)
        if best is None or final < best[0]:
            best = (final, theta, gamma, opt)
    _, theta, gamma, opt = best
    return theta, gamma, gmat, opt, cols


def fit_prior_pairs(form, xk, targets, cfg: PriorFitCfg, init=None, fit_mask=None):
    """Gradient fit of (theta, gamma) to (x_k, target) pairs.

    targets: (N,) for scalar forms or (N, output_dim) with fit_mask picking
    the components entering the loss. Returns a Prior.
    """
    theta, gamma, _, _, _ = _fit_prior_core(form, xk, targets, cfg, init, fit_mask)
    return Prior(form, theta.data.copy(), gamma.data.copy())


def fit_prior(form, data: Dataset, cfg: PriorFitCfg | None = None, init=None):
    """Fit h_k + gamma directly on the observed targets."""
    cfg = cfg or PriorFitCfg()
    return fit_prior_pairs(form, data.xk, data.targets, cfg, init=init)


def _combined_val_mse(prior, residual, val: Dataset):
    model = HybridModel(prior, residual)
    pred = model.predict(val.features)
    out = float(np.mean((pred - val.targets) ** 2))
    if not np.isfinite(out):
        raise DivergenceError("validation loss became non-finite")
    return out


def _prior_known_values(prior, features):
    return prior.predict_known(features[:, list(prior.form.known_indices)])[:, 0]


def sequential_fit(prior_form, residual, train: Dataset, val: Dataset,
                   prior_cfg: PriorFitCfg | None = None):
    """Fit the prior on y, then the residual on what the prior leaves over.

    The residual step never touches the prior's parameters.
    """
    prior = fit_prior(prior_form, train, prior_cfg)
    res_train = train.targets - _prior_known_values(prior, train.features)
    res_val = val.targets - _prior_known_values(prior, val.features)
    residual.fit(train.features, res_train, val.features, res_val)
    return HybridModel(prior, residual)


def alternate_fit(prior_form, residual, train: Dataset, val: Dataset,
                  n_epochs=1500, prior_cfg: PriorFitCfg | None = None,
                  log: StageLog | None = None):
    """Interleave residual refits with single gradient steps on the prior.

    The prior starts from a full fit on y. Each epoch refits the residual on
    the current residuals (complete refit for trees, one epoch for nets) and
    then takes one optimizer step on (theta, gamma) holding the residual
    fixed; one final residual refit closes the loop. Best-validation
    parameters are returned.
    """
    if n_epochs < 1:
        raise ConfigurationError("n_epochs must be >= 1")
    cfg = prior_cfg or PriorFitCfg()
    # prior initialized by a full fit on y; the same optimizer then continues
    # through the alternate loop (so a zero-capacity residual reduces this
    # scheme exactly to longer prior-only fitting)
    theta, gamma, gmat, opt, _ = _fit_prior_core(prior_form, train.xk,
                                                 train.targets, cfg)
    xk = train.xk
    log = log if log is not None else StageLog()
    best = None
    for epoch in range(n_epochs + 1):
        cur_prior = Prior(prior_form, theta.data.copy(), gamma.data.copy())
        res_target = train.targets - _prior_known_values(cur_prior, train.features)
        residual.fit_epochs(train.features, res_target, 1)
        vl = _combined_val_mse(cur_prior, residual, val)
        log.val_losses.append(vl)
        if vl < log.best_val:
            log.best_val = vl
            log.best_stage = epoch
            best = (theta.data.copy(), gamma.data.copy(), residual.get_state())
        if epoch == n_epochs:
            break
        prior_target = train.targets - residual.predict(train.features)
        loss = _prior_step(prior_form, theta, gamma, gmat, xk,
                           prior_target[:, None], None)
        if not np.isfinite(loss.data):
            raise DivergenceError(f"alternate prior step diverged at epoch {epoch}",
                                  step=epoch)
        loss.backward()
        opt.step([theta, gamma])
    theta_b, gamma_b, res_state = best
    residual.set_state(res_state)
    return HybridModel(Prior(prior_form, theta_b, gamma_b), residual)


def pd_fit(prior_form, residual, train: Dataset, val: Dataset, n_repeats=5,
           prior_cfg: PriorFitCfg | None = None, log: StageLog | None = None):
    """Fit the prior to the partial dependence of the residual model.

    Stages: full residual fit on y; prior fit on the PD proxy pairs; then
    n_repeats rounds of (residual refit on corrected residuals, prior refit
    on PD + current prior); one final residual refit. Validation selects
    among the coherent (prior, residual) stages.
    """
    if n_repeats < 0:
        raise ConfigurationError("n_repeats must be >= 0")
    if set(residual.input_filter) & set(train.known_feature_indices):
        raise ConfigurationError(
            "PD-based training needs the residual to see x_k (no filtering)")
    cfg = prior_cfg or PriorFitCfg()
    log = log if log is not None else StageLog()

    residual.fit(train.features, train.targets, val.features, val.targets)
    xk, pd_targets = pd_dataset(residual, train)
    prior = fit_prior_pairs(prior_form, xk, pd_targets, cfg)

    best = None

    def consider(stage, prior_now):
        nonlocal best
        vl = _combined_val_mse(prior_now, residual, val)
        log.val_losses.append(vl)
        if vl < log.best_val:
            log.best_val = vl
            log.best_stage = stage
            best = (prior_now.theta.copy(), prior_now.gamma.copy(),
                    residual.get_state())

    for n in range(n_repeats):
        res_target = train.targets - _prior_known_values(prior, train.features)
        res_val = val.targets - _prior_known_values(prior, val.features)
        residual.fit(train.features, res_target, val.features, res_val)
        consider(n, prior)
        _, pd_now = pd_dataset(residual, train)
        new_targets = _prior_known_values(prior, train.features) + pd_now
        prior = fit_prior_pairs(prior_form, xk, new_targets, cfg,
                                init=(prior.theta, prior.gamma))
    res_target = train.targets - _prior_known_values(prior, train.features)
    res_val = val.targets - _prior_known_values(prior, val.features)
    residual.fit(train.features, res_target, val.features, res_val)
    consider(n_repeats, prior)

    theta_b, gamma_b, res_state = best
    residual.set_state(res_state)
    return HybridModel(Prior(prior_form, theta_b, gamma_b), residual)


def data_driven_fit(residual, train: Dataset, val: Dataset):
    """h_a-only baseline: the residual model fit straight on y."""
    residual.fit(train.features, train.targets, val.features, val.targets)
    return HybridModel(None, residual)


def oracle_residual_fit(truth_prior: Prior, residual, train: Dataset, val: Dataset):
    """Ideal baseline: residual fit on y - f_k(x_k) with the true prior."""
    res_train = train.targets - _prior_known_values(truth_prior, train.features)
    res_val = val.targets - _prior_known_values(truth_prior, val.features)
    residual.fit(train.features, res_train, val.features, res_val)
    zero_gamma = Prior(truth_prior.form, truth_prior.theta,
                       np.zeros(truth_prior.form.gamma_dim))
    return HybridModel(zero_gamma, residual)
