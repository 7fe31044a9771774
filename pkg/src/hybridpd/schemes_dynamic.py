"""Dynamical-system hybrid training: trajectory fitting through unrolled
integration (discretize-then-optimize), plus the joint / alternate /
PD-based schemes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .data import TrajectoryDataset
from .dynamics import DynamicHybrid, IntegratorCfg, integrate, integrate_ad
from .errors import ConfigurationError, DivergenceError
from .nets import Adam
from .partial_dependence import pd_values
from .priors import Prior
from .schemes_static import PriorFitCfg, fit_prior_pairs


class WindowSet:
    """Lazy sub-trajectory windows over a TrajectoryDataset."""

    def __init__(self, data: TrajectoryDataset, length, stride):
        if length < 2 or length > data.horizon + 1:
            raise ConfigurationError("window length out of range")
        self.data = data
        self.length = length
        starts = range(0, data.horizon + 2 - length, stride)
        self.index = [(i, s) for i in range(data.n_traj) for s in starts]
        self._traj_idx = np.array([i for i, _ in self.index])
        self._start_idx = np.array([s for _, s in self.index])
        # (n_traj, n_positions, length, d) strided view; indexing it copies
        # exactly the requested batch
        self._view = np.lib.stride_tricks.sliding_window_view(
            data.trajectories, length, axis=1).transpose(0, 1, 3, 2)

    def __len__(self):
        return len(self.index)

    def batch(self, idxs):
        return self._view[self._traj_idx[idxs], self._start_idx[idxs]]


@dataclass
class DynTrainCfg:
    """Training knobs for one dynamical problem (desk-scalable)."""

    epochs: int = 500
    lr: float = 5e-4
    batch_size: int = 32
    val_every: int = 5
    seed: int = 0
    integrator: IntegratorCfg = field(default_factory=lambda: IntegratorCfg("euler", 0.05, 1))
    init_epochs: int = 150
    pd_repeats: int = 10
    pd_block_epochs: int = 50
    pd_final_epochs: int = 150
    pd_background_cap: int = 512
    pd_query_cap: int | None = 4096
    prior_fit: PriorFitCfg = field(default_factory=lambda: PriorFitCfg(epochs=2000, lr=0.005))
    train_dtype: str = "float64"  # training precision; metrics stay float64
    val_traj_cap: int | None = None  # monitor on a subset of val trajectories

    def scaled(self, factor):
        """Shrink every epoch budget by the desk-scale factor (>= 1 each)."""
        if factor >= 1.0:
            return self
        f = lambda e: max(1, int(round(e * factor)))
        return replace(self, epochs=f(self.epochs), init_epochs=f(self.init_epochs),
                       pd_block_epochs=f(self.pd_block_epochs),
                       pd_final_epochs=f(self.pd_final_epochs))


@dataclass
class DynFitInfo:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_val: float = np.inf
    stage_val: list = field(default_factory=list)


class _NetOnly:
    """Adapter exposing a dynamics net as a predict()-model for PD sweeps."""

    input_filter = ()

    def __init__(self, hybrid):
        self._hybrid = hybrid

    def predict(self, x):
        return self._hybrid._net_deriv(np.asarray(x, dtype=np.float64))


class NodeTrainer:
    """Mini-batch BPTT over trajectory windows with best-val tracking.

    The prior's (theta, gamma) live as Vars; toggling their requires_grad
    switches them between trained and frozen without rebuilding anything.
    """

    def __init__(self, hybrid: DynamicHybrid, windows: WindowSet,
                 val_data: TrajectoryDataset, cfg: DynTrainCfg):
        self.hybrid = hybrid
        self.windows = windows
        self.val_data = val_data
        self.cfg = cfg
        self.dtype = np.dtype(cfg.train_dtype)
        self.rng = np.random.default_rng([int(cfg.seed), 0x6E6F6465])
        self.opt = Adam(lr=cfg.lr)
        self.info = DynFitInfo()
        if hybrid.prior is not None:
            self.theta = ad.Var(hybrid.prior.theta.astype(self.dtype), requires_grad=True)
            self.gamma = ad.Var(hybrid.prior.gamma.astype(self.dtype), requires_grad=True)
        else:
            self.theta = None
            self.gamma = None
        self._best = None
        self._epoch_count = 0

    # -- plumbing ---------------------------------------------------------

    def sync_prior(self):
        """Copy the live Vars back into the hybrid's Prior (numpy paths)."""
        if self.theta is not None:
            self.hybrid.prior.theta = self.theta.data.astype(np.float64)
            self.hybrid.prior.gamma = self.gamma.data.astype(np.float64)

    def params_snapshot(self):
        net = None if self.hybrid.net is None else self.hybrid.net.get_params()
        th = None if self.theta is None else self.theta.data.copy()
        gm = None if self.gamma is None else self.gamma.data.copy()
        return net, th, gm

    def restore(self, snap):
        net, th, gm = snap
        if net is not None:
            self.hybrid.net.set_params(net)
        if th is not None:
            self.theta.data = th.copy()
            self.gamma.data = gm.copy()
        self.sync_prior()

    def _trainable(self, train_prior, train_net):
        params = []
        if self.theta is not None:
            self.theta.requires_grad = bool(train_prior)
            self.gamma.requires_grad = bool(train_prior)
            if train_prior:
                params += [self.theta, self.gamma]
        if self.hybrid.net is not None:
            # toggling the flag lets frozen phases skip weight gradients
            for p in self.hybrid.net.params:
                p.requires_grad = bool(train_net)
            if train_net:
                params += self.hybrid.net.params
        return params

    def _batch_loss(self, batch):
        batch = batch.astype(self.dtype, copy=False)
        x0 = ad.Var(np.ascontiguousarray(batch[:, 0, :]))
        deriv = lambda x: self.hybrid.deriv_ad(x, theta=self.theta, gamma=self.gamma)
        states = integrate_ad(deriv, x0, self.cfg.integrator, self.windows.length - 1)
        total = None
        for t, st in enumerate(states):
            term = ad.mse(st, batch[:, t + 1, :])
            total = term if total is None else total + term
        return total * (1.0 / len(states))

    # -- training ---------------------------------------------------------

    def run_epoch(self, train_prior=True, train_net=True):
        params = self._trainable(train_prior, train_net)
        if not params:
            raise ConfigurationError("nothing to train this phase")
        order = self.rng.permutation(len(self.windows))
        bs = self.cfg.batch_size
        epoch_loss = 0.0
        for lo in range(0, len(order), bs):
            batch = self.windows.batch(order[lo:lo + bs])
            loss = self._batch_loss(batch)
            val = float(loss.data)
            if not np.isfinite(val):
                raise DivergenceError(
                    f"training diverged at epoch {self._epoch_count}",
                    step=self._epoch_count)
            loss.backward()
            self.opt.step(params)
            for p in params:
                p.grad = None
            epoch_loss += val * batch.shape[0]
        self._epoch_count += 1
        self.info.train_loss.append(epoch_loss / len(self.windows))

    def validate(self, record_candidate=True):
        """Full-horizon trajectory MSE on the validation split (optionally a
        fixed leading subset of trajectories, for expensive field systems)."""
        self.sync_prior()
        trajs = self.val_data.trajectories
        if self.cfg.val_traj_cap is not None:
            trajs = trajs[: self.cfg.val_traj_cap]
        try:
            pred = integrate(self.hybrid.deriv, trajs[:, 0, :],
                             self.cfg.integrator, self.val_data.horizon)
            err = pred[:, 1:, :] - trajs[:, 1:, :]
            vl = float(np.mean(err * err))
        except DivergenceError:
            vl = float("inf")
        self.info.val_loss.append(vl)
        if record_candidate and vl < self.info.best_val:
            self.info.best_val = vl
            self._best = self.params_snapshot()
        return vl

    def train(self, epochs, train_prior=True, train_net=True, alternate=False,
              record_candidates=True):
        for e in range(epochs):
            if alternate:
                self.run_epoch(train_prior=False, train_net=True)
                self.run_epoch(train_prior=True, train_net=False)
            else:
                self.run_epoch(train_prior=train_prior, train_net=train_net)
            if (e + 1) % self.cfg.val_every == 0 or e == epochs - 1:
                self.validate(record_candidate=record_candidates)

    def restore_best(self):
        if self._best is not None:
            self.restore(self._best)


def _seeded_net(problem, cfg, make_net):
    net = make_net(cfg.seed)
    if problem.train.grid_shape is None:
        return DynamicHybrid(None, net)
    return DynamicHybrid(None, net, grid_shape=problem.train.grid_shape,
                         channels=problem.train.channels)


def _random_prior(problem, cfg, tag):
    rng = np.random.default_rng([int(cfg.seed), tag])
    form = problem.prior_form
    return Prior(form, form.init_theta(rng), form.init_gamma(rng))


def fit_node(problem, cfg: DynTrainCfg, make_net, prior: Prior | None = None,
             freeze_prior=True):
    """Data-driven trajectory fit of a dynamics net (optionally on top of a
    frozen prior); returns (DynamicHybrid, DynFitInfo)."""
    hybrid = _seeded_net(problem, cfg, make_net)
    hybrid.prior = prior.copy() if prior is not None else None
    windows = WindowSet(problem.train, problem.window_len, problem.window_stride)
    trainer = NodeTrainer(hybrid, windows, problem.val, cfg)
    trainer.train(cfg.epochs, train_prior=not freeze_prior if prior is not None else False,
                  train_net=True)
    trainer.restore_best()
    return hybrid, trainer.info


def joint_fit(problem, cfg: DynTrainCfg, make_net):
    """Simultaneous gradient updates on (theta, gamma, net) from random init."""
    hybrid = _seeded_net(problem, cfg, make_net)
    hybrid.prior = _random_prior(problem, cfg, 0x6A6F696E)
    windows = WindowSet(problem.train, problem.window_len, problem.window_stride)
    trainer = NodeTrainer(hybrid, windows, problem.val, cfg)
    trainer.train(cfg.epochs, train_prior=True, train_net=True)
    trainer.restore_best()
    return hybrid, trainer.info


def fit_prior_node(problem, cfg: DynTrainCfg, epochs=None):
    """Trajectory fit of the prior alone (h_k + gamma minimizing the
    trajectory distance); used to initialize the alternate scheme."""
    hybrid = DynamicHybrid(_random_prior(problem, cfg, 0x696E6974), None)
    windows = WindowSet(problem.train, problem.window_len, problem.window_stride)
    trainer = NodeTrainer(hybrid, windows, problem.val, cfg)
    trainer.train(epochs or cfg.init_epochs, train_prior=True, train_net=False)
    trainer.restore_best()
    trainer.sync_prior()
    return hybrid.prior


def alternate_fit_dyn(problem, cfg: DynTrainCfg, make_net, init_prior=True):
    """Per epoch: one gradient pass over the net, then one over (theta,
    gamma); one extra net pass at the end."""
    hybrid = _seeded_net(problem, cfg, make_net)
    if init_prior:
        hybrid.prior = fit_prior_node(problem, cfg)
    else:
        hybrid.prior = _random_prior(problem, cfg, 0x616C7464)
    windows = WindowSet(problem.train, problem.window_len, problem.window_stride)
    trainer = NodeTrainer(hybrid, windows, problem.val, cfg)
    trainer.train(cfg.epochs, alternate=True)
    trainer.run_epoch(train_prior=False, train_net=True)
    trainer.validate()
    trainer.restore_best()
    return hybrid, trainer.info


def _pooled_pd_inputs(problem, cfg):
    """Pooled training states as PD background/queries (seeded caps)."""
    pool = problem.train.pooled_states()
    rng = np.random.default_rng([int(cfg.seed), 0x7064706C])
    bg = pool
    if cfg.pd_background_cap and pool.shape[0] > cfg.pd_background_cap:
        bg = pool[rng.choice(pool.shape[0], cfg.pd_background_cap, replace=False)]
    queries = pool
    if cfg.pd_query_cap and pool.shape[0] > cfg.pd_query_cap:
        queries = pool[rng.choice(pool.shape[0], cfg.pd_query_cap, replace=False)]
    xk = queries[:, list(problem.prior_form.known_indices)]
    return xk, bg


def pd_fit_dyn(problem, cfg: DynTrainCfg, make_net):
    """PD-based dynamic training.

    A net-only trajectory fit seeds the process; the prior is then fit to the
    net's partial dependence over pooled training states, and (net block,
    prior PD refit) rounds alternate, with the prior frozen bitwise during
    net blocks. Model selection runs globally over the coherent stages.
    """
    hybrid = _seeded_net(problem, cfg, make_net)
    windows = WindowSet(problem.train, problem.window_len, problem.window_stride)
    trainer = NodeTrainer(hybrid, windows, problem.val, cfg)
    # stage 0: h_a alone models the full dynamics (no candidate recorded:
    # the returned model must carry a prior)
    trainer.train(cfg.pd_block_epochs, train_prior=False, train_net=True,
                  record_candidates=False)

    form = problem.prior_form
    xk, background = _pooled_pd_inputs(problem, cfg)
    pdv = pd_values(_NetOnly(hybrid), background, xk, form.known_indices)
    prior = fit_prior_pairs(form, xk, pdv, replace(cfg.prior_fit, seed=cfg.seed),
                            fit_mask=form.fit_mask)
    hybrid.prior = prior
    trainer.theta = ad.Var(prior.theta.copy(), requires_grad=False)
    trainer.gamma = ad.Var(prior.gamma.copy(), requires_grad=False)

    gamma_row = prior.gamma_row()
    mask = np.asarray(form.fit_mask, dtype=bool)
    for n in range(cfg.pd_repeats):
        trainer.train(cfg.pd_block_epochs, train_prior=False, train_net=True)
        trainer.info.stage_val.append(trainer.info.val_loss[-1])
        pdv = pd_values(_NetOnly(hybrid), background, xk, form.known_indices)
        prior_known = prior.predict_known(xk, include_gamma=True)
        targets = np.where(mask, prior_known + pdv, 0.0)
        prior = fit_prior_pairs(form, xk, targets,
                                replace(cfg.prior_fit, seed=cfg.seed),
                                init=(prior.theta, prior.gamma),
                                fit_mask=form.fit_mask)
        hybrid.prior = prior
        trainer.theta.data = prior.theta.copy()
        trainer.gamma.data = prior.gamma.copy()
    trainer.train(cfg.pd_final_epochs, train_prior=False, train_net=True)
    trainer.restore_best()
    return hybrid, trainer.info


def oracle_residual_fit_dyn(problem, cfg: DynTrainCfg, make_net):
    """Ideal baseline: net fit on top of the frozen true prior (gamma 0)."""
    return fit_node(problem, cfg, make_net, prior=problem.truth_prior,
                    freeze_prior=True)
