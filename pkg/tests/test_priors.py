"""Prior forms: values, analytic gradients vs finite differences, offsets."""
import numpy as np
import pytest

from hybridpd import autodiff as ad
from hybridpd.errors import ConfigurationError
from hybridpd.priors import (LinearForm, LotkaVolterraForm, PendulumForm,
                             Prior, QuadraticForm, ReactionDiffusionForm,
                             SineProductForm)

ALL_FORMS = [
    (LinearForm((0, 2)), 4),
    (SineProductForm((0, 1)), 3),
    (QuadraticForm((1,)), 3),
    (LotkaVolterraForm(), 2),
    (PendulumForm(), 2),
    (ReactionDiffusionForm((6, 6)), 72),
]


def test_linear_values():
    form = LinearForm((0, 1))
    out = form.eval_known(np.array([2.0, -1.0]), np.array([[1.0, 3.0]]))
    assert out[0, 0] == pytest.approx(-1.0)


def test_sine_product_values():
    form = SineProductForm()
    out = form.eval_known(np.array([2.0, 0.5]), np.array([[1.0, 2.0]]))
    assert out[0, 0] == pytest.approx(2.0 * np.sin(1.0))


def test_pendulum_structural_row():
    form = PendulumForm()
    state = np.array([[0.3, 1.7]])
    out = form.eval_state(np.array([4.0]), state)
    assert out[0, 0] == pytest.approx(1.7)
    assert out[0, 1] == pytest.approx(-4.0 * np.sin(0.3))
    assert not form.fit_mask[0] and form.fit_mask[1]
    # offset never touches the identity row
    prior = Prior(form, np.array([4.0]), np.array([9.0]))
    assert prior.gamma_row()[0] == 0.0 and prior.gamma_row()[1] == 9.0


def test_lotka_volterra_values():
    form = LotkaVolterraForm()
    out = form.eval_state(np.array([1.5]), np.array([[0.2, 0.7]]))
    assert out[0, 0] == pytest.approx(-1.5 * np.exp(0.7))
    assert out[0, 1] == 0.0


def test_reaction_diffusion_constant_field_zero_laplacian():
    form = ReactionDiffusionForm((8, 8))
    state = np.full((2, 2 * 64), 3.3)
    out = form.eval_state(np.array([0.01, 0.02]), state)
    assert np.allclose(out, 0.0, atol=1e-12)


def test_reaction_diffusion_known_stencil_value():
    form = ReactionDiffusionForm((4, 4), dx=1.0)
    field = np.zeros((1, 2, 4, 4))
    field[0, 0, 1, 1] = 1.0
    out = form.eval_state(np.array([1.0, 1.0]), field.reshape(1, -1))
    lap = out[0, :16].reshape(4, 4)
    assert lap[1, 1] == pytest.approx(-4.0)
    assert lap[0, 1] == lap[2, 1] == lap[1, 0] == lap[1, 2] == pytest.approx(1.0)


@pytest.mark.parametrize("form,dim", ALL_FORMS)
def test_analytic_gradients_match_finite_differences(form, dim):
    rng = np.random.default_rng(0)
    n = 7
    state = rng.uniform(0.1, 0.9, size=(n, dim))
    theta0 = rng.uniform(0.5, 1.5, size=form.n_params)
    target = rng.normal(size=(n, form.output_dim))

    theta = ad.Var(theta0.copy(), requires_grad=True)
    gamma = ad.Var(rng.normal(size=form.gamma_dim), requires_grad=True)

    def loss_val(th, gm):
        out = form.eval_state(th, state) + form.gamma_matrix @ gm
        return float(np.mean((out - target) ** 2))

    out = form.eval_state_ad(theta, ad.Var(state))
    out = out + ad.matmul(ad.reshape(gamma, (1, form.gamma_dim)),
                          ad.Var(form.gamma_matrix.T))
    ad.mse(out, target).backward()

    num = ad.numeric_gradient(lambda: loss_val(theta.data, gamma.data),
                              [theta.data, gamma.data])
    for var, n_grad in zip([theta, gamma], num):
        scale = np.max(np.abs(n_grad)) + 1e-12
        assert np.max(np.abs(var.grad - n_grad)) / scale < 1e-5


def test_eval_known_matches_eval_state_on_projection():
    form = LotkaVolterraForm()
    rng = np.random.default_rng(1)
    state = rng.normal(size=(5, 2))
    theta = np.array([0.8])
    known = form.eval_known(theta, state[:, [1]])
    full = form.eval_state(theta, state)
    assert np.allclose(known, full)


def test_prior_shape_validation():
    with pytest.raises(ConfigurationError):
        Prior(LinearForm((0,)), np.array([1.0, 2.0]), np.array([0.0]))
    with pytest.raises(ConfigurationError):
        Prior(LotkaVolterraForm(), np.array([1.0]), np.array([0.0]))  # gamma_dim 2


def test_evaluation_deterministic():
    form = SineProductForm()
    xk = np.random.default_rng(3).normal(size=(10, 2))
    theta = np.array([1.2, 0.7])
    a = form.eval_known(theta, xk)
    b = form.eval_known(theta, xk)
    assert np.array_equal(a, b)
