"""Dynamic scheme semantics at tiny scale: reductions, freezing, windows."""
import numpy as np
import pytest

from hybridpd import problems
from hybridpd.dynamics import DynamicHybrid, IntegratorCfg
from hybridpd.errors import ConfigurationError
from hybridpd.metrics import eval_traj_mse
from hybridpd.nets import Mlp, MlpSpec
from hybridpd.schemes_dynamic import (DynTrainCfg, NodeTrainer, WindowSet,
                                      alternate_fit_dyn, fit_node,
                                      fit_prior_node, joint_fit, pd_fit_dyn)


def tiny_lv(seed=0):
    return problems.sim_lotka_volterra(seed, scale=0.04, n_steps=80)


def tiny_cfg(**kw):
    base = dict(epochs=6, lr=2e-3, batch_size=16, val_every=2, seed=0,
                integrator=IntegratorCfg("euler", 0.05, 1), init_epochs=8,
                pd_repeats=2, pd_block_epochs=3, pd_final_epochs=4,
                pd_background_cap=64, pd_query_cap=128)
    base.update(kw)
    return DynTrainCfg(**base)


def small_net(seed):
    return Mlp(MlpSpec(2, 2, hidden_layers=1, width=12), seed=seed)


def test_window_counts_match_stride_arithmetic():
    lv = tiny_lv()
    ws = WindowSet(lv.train, 41, 2)
    per_traj = (lv.train.horizon + 1 - 41) // 2 + 1
    assert len(ws) == per_traj * lv.train.n_traj
    batch = ws.batch([0, 1])
    assert batch.shape == (2, 41, 2)
    assert np.array_equal(batch[0], lv.train.trajectories[0, :41])


def test_window_length_validation():
    lv = tiny_lv()
    with pytest.raises(ConfigurationError):
        WindowSet(lv.train, lv.train.horizon + 5, 2)


def test_fit_node_truth_dynamics_barely_moves():
    """Starting at (numerically) the truth, training should not wander."""
    lv = tiny_lv()
    cfg = tiny_cfg(epochs=3)

    class TruthNet:
        params = []

        def predict(self, x):
            return lv.dynamics_true(x)

        def forward(self, x):
            import hybridpd.autodiff as ad
            p, q = x[:, 0:1], x[:, 1:2]
            return ad.concat([1.0 - ad.exp(q), -1.0 + ad.exp(p)], axis=1)

        def get_params(self):
            return []

        def set_params(self, values):
            return None

    hybrid = DynamicHybrid(None, TruthNet())
    ws = WindowSet(lv.train, 11, 4)
    trainer = NodeTrainer(hybrid, ws, lv.val, cfg)
    vl = trainer.validate(record_candidate=False)
    # Euler-integration error only; the truth should already fit well
    assert vl < 1e-3


def test_joint_trains_prior_and_net():
    lv = tiny_lv()
    model, info = joint_fit(lv, tiny_cfg(), small_net)
    assert model.prior is not None and model.net is not None
    assert len(info.train_loss) == 6
    assert info.best_val < np.inf
    # training reduced the loss
    assert info.train_loss[-1] < info.train_loss[0]


def test_alternate_zero_capacity_equals_prior_only():
    lv = tiny_lv()

    class ZeroNet:
        """One inert parameter so training phases run; output is always 0."""

        def __init__(self):
            import hybridpd.autodiff as ad
            self.params = [ad.Var(np.zeros(1), requires_grad=True)]

        def predict(self, x):
            return np.zeros_like(np.asarray(x, dtype=np.float64))

        def forward(self, x):
            return x * 0.0 * self.params[0][0]

        def get_params(self):
            return [p.data.copy() for p in self.params]

        def set_params(self, values):
            for p, v in zip(self.params, values):
                p.data = np.array(v)

    cfg = tiny_cfg(epochs=4)
    model, _ = alternate_fit_dyn(lv, cfg, lambda s: ZeroNet(), init_prior=True)
    assert np.all(model.net.params[0].data == 0.0)  # inert net untouched
    prior_only = fit_prior_node(lv, cfg, epochs=None)
    # both are prior-only trajectory fits; the alternate run continues longer
    # so compare model quality rather than parameter identity
    a = eval_traj_mse(DynamicHybrid(model.prior, None), lv.val, cfg.integrator)
    b = eval_traj_mse(DynamicHybrid(prior_only, None), lv.val, cfg.integrator)
    assert a <= b * 1.5 + 1e-6


def test_pd_prior_frozen_bitwise_during_net_blocks():
    lv = tiny_lv()
    cfg = tiny_cfg()
    seen = []

    import hybridpd.schemes_dynamic as dyn
    orig_train = NodeTrainer.train

    def spy_train(self, epochs, **kw):
        if self.theta is not None:
            before = (self.theta.data.copy(), self.gamma.data.copy())
            orig_train(self, epochs, **kw)
            after = (self.theta.data, self.gamma.data)
            if not kw.get("train_prior", True):
                seen.append((np.array_equal(before[0], after[0]),
                             np.array_equal(before[1], after[1])))
        else:
            orig_train(self, epochs, **kw)

    NodeTrainer.train = spy_train
    try:
        pd_fit_dyn(lv, cfg, small_net)
    finally:
        NodeTrainer.train = orig_train
    assert seen, "no frozen-prior blocks observed"
    assert all(t and g for t, g in seen)


def test_pd_fit_returns_prior_bearing_model():
    lv = tiny_lv()
    model, info = pd_fit_dyn(lv, tiny_cfg(), small_net)
    assert model.prior is not None
    assert np.isfinite(info.best_val)


def test_dynamic_determinism():
    lv = tiny_lv()

    def run():
        model, _ = joint_fit(lv, tiny_cfg(), small_net)
        return (model.prior.theta.copy(), model.prior.gamma.copy(),
                [p.copy() for p in model.net.get_params()])

    a, b = run(), run()
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])
    for x, y in zip(a[2], b[2]):
        assert np.array_equal(x, y)


def test_prior_init_improves_over_random_start():
    lv = tiny_lv()
    cfg = tiny_cfg(init_epochs=30, lr=2e-2)
    fitted = fit_prior_node(lv, cfg)
    from hybridpd.schemes_dynamic import _random_prior
    start = _random_prior(lv, cfg, 0x696E6974)
    a = eval_traj_mse(DynamicHybrid(fitted, None), lv.val, cfg.integrator)
    b = eval_traj_mse(DynamicHybrid(start, None), lv.val, cfg.integrator)
    assert a <= b


def test_scaled_cfg_shrinks_epochs():
    cfg = DynTrainCfg(epochs=500, init_epochs=150, pd_block_epochs=50,
                      pd_final_epochs=150)
    s = cfg.scaled(0.25)
    assert (s.epochs, s.init_epochs, s.pd_block_epochs, s.pd_final_epochs) \
        == (125, 38, 12, 38)
    assert cfg.scaled(1.0) is cfg
