"""Metric definitions, edge cases, and scale properties."""
import numpy as np
import pytest

from hybridpd.data import Dataset, TrajectoryDataset
from hybridpd.dynamics import IntegratorCfg, integrate
from hybridpd.errors import ConfigurationError
from hybridpd.metrics import (MetricNaNError, eval_d_hat, eval_dk_hat,
                              eval_log_traj_mse, eval_rmae, eval_traj_mse)
from hybridpd.priors import LinearForm, Prior


class Const:
    def __init__(self, c):
        self.c = c

    def predict(self, x):
        return np.full(np.asarray(x).shape[0], self.c)


def test_d_hat_exact_fit_zero():
    data = Dataset(np.array([[1.0], [2.0]]), np.array([3.0, 6.0]), (0,))

    class Triple:
        def predict(self, x):
            return 3.0 * np.asarray(x)[:, 0]

    assert eval_d_hat(Triple(), data) == 0.0


def test_d_hat_constant_model_hand_value():
    data = Dataset(np.array([[0.0], [0.0]]), np.array([0.0, 2.0]), (0,))
    assert eval_d_hat(Const(1.0), data) == pytest.approx(1.0)


def test_d_hat_nonnegative_and_zero_iff_equal():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(9, 2)), rng.normal(size=9), (0,))
    assert eval_d_hat(Const(0.0), data) > 0.0


def test_d_hat_nan_aborts():
    data = Dataset(np.array([[1.0]]), np.array([1.0]), (0,))
    with pytest.raises(MetricNaNError):
        eval_d_hat(Const(np.nan), data)


def test_dk_hat_identical_priors_zero():
    form = LinearForm((0,))
    p = Prior(form, np.array([2.0]), np.array([5.0]))
    data = Dataset(np.random.default_rng(0).normal(size=(10, 1)),
                   np.zeros(10), (0,))
    assert eval_dk_hat(p, p, data) == 0.0


def test_dk_hat_hand_value_and_gamma_excluded():
    form = LinearForm((0,))
    a = Prior(form, np.array([1.0]), np.array([100.0]))
    b = Prior(form, np.array([2.0]), np.array([-50.0]))
    data = Dataset(np.array([[1.0], [-1.0]]), np.zeros(2), (0,))
    # (1-2)^2 * x^2 averaged over x in {1,-1} -> 1; offsets must not matter
    assert eval_dk_hat(a, b, data) == pytest.approx(1.0)


def test_dk_hat_form_mismatch_rejected():
    a = Prior(LinearForm((0,)), np.array([1.0]), np.array([0.0]))
    b = Prior(LinearForm((1,)), np.array([1.0]), np.array([0.0]))
    data = Dataset(np.zeros((2, 2)) + 1.0, np.zeros(2), (0,))
    with pytest.raises(ConfigurationError):
        eval_dk_hat(a, b, data)


def test_rmae_zero_for_exact():
    assert eval_rmae([1.0, -2.0], [1.0, -2.0]) == 0.0


def test_rmae_biased_slope_example():
    assert eval_rmae([0.625], [-0.5]) == pytest.approx(225.0)


def test_rmae_two_components_hand_value():
    assert eval_rmae([1.0, 3.0], [2.0, 2.0]) == pytest.approx(50.0)


def test_rmae_zero_truth_rejected():
    with pytest.raises(ConfigurationError):
        eval_rmae([1.0], [0.0])


def test_rmae_scale_contravariance():
    theta_star = np.array([2.0, -1.0])
    gap = np.array([0.3, 0.4])
    base = eval_rmae(theta_star + gap, theta_star)
    scaled = eval_rmae(theta_star + 3.0 * gap, theta_star)
    assert scaled == pytest.approx(3.0 * base)


def make_decay_traj():
    cfg = IntegratorCfg("rk4", 0.1, 100)
    deriv = lambda x: -x
    trajs = integrate(deriv, np.array([[1.0], [2.0]]), cfg, 20)
    return TrajectoryDataset(trajs, 0.1)


def test_traj_mse_true_dynamics_near_zero():
    data = make_decay_traj()
    model = lambda x: -x
    cfg = IntegratorCfg("rk4", 0.1, 100)
    assert eval_traj_mse(model, data, cfg) < 1e-10


def test_traj_mse_zero_dynamics_matches_reference():
    data = make_decay_traj()
    model = lambda x: np.zeros_like(x)
    got = eval_traj_mse(model, data, IntegratorCfg("euler", 0.1, 1))
    # constant-zero dynamics never move: error is the decay gap itself
    t = 0.1 * np.arange(1, 21)
    expect = np.mean(((1.0 - np.exp(-t)) ** 2 + (2.0 - 2.0 * np.exp(-t)) ** 2) / 2)
    assert got == pytest.approx(expect, rel=1e-6)


def test_log_variant_is_ln():
    data = make_decay_traj()
    model = lambda x: np.zeros_like(x)
    cfg = IntegratorCfg("euler", 0.1, 1)
    assert eval_log_traj_mse(model, data, cfg) == pytest.approx(
        np.log(eval_traj_mse(model, data, cfg)))


def test_divergence_reported_not_silent():
    data = make_decay_traj()
    model = lambda x: x * 1e160
    from hybridpd.errors import DivergenceError
    with pytest.raises(DivergenceError) as err:
        eval_traj_mse(model, data, IntegratorCfg("euler", 0.1, 1))
    assert err.value.step is not None
