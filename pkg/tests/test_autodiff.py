"""Gradient correctness of the reverse-mode engine against central
finite differences."""
import numpy as np
import pytest

from hybridpd import autodiff as ad


def rel_err(a, b):
    # relative to the gradient's scale: elementwise relative error is
    # finite-difference-noise-limited for near-zero components
    return np.max(np.abs(a - b)) / (np.max(np.abs(b)) + 1e-12)


def test_square_scalar():
    p = ad.Var(np.array(3.0), requires_grad=True)
    (p * p).backward()
    assert p.grad == pytest.approx(6.0)


def test_constant_loss_zero_gradient():
    p = ad.Var(np.array([1.0, -2.0]), requires_grad=True)
    loss = ad.vsum(p * 0.0)
    loss.backward()
    assert np.all(p.grad == 0.0)


def test_grad_accumulates_over_reused_node():
    p = ad.Var(np.array(2.0), requires_grad=True)
    out = p * p + p  # p appears three times
    out.backward()
    assert p.grad == pytest.approx(5.0)


@pytest.mark.parametrize("seed", range(20))
def test_random_mlp_grads_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n_in = rng.integers(1, 5)
    width = rng.integers(2, 16)
    w1 = ad.Var(rng.normal(size=(n_in, width)) * 0.6, requires_grad=True)
    b1 = ad.Var(rng.normal(size=width) * 0.1, requires_grad=True)
    w2 = ad.Var(rng.normal(size=(width, 1)) * 0.6, requires_grad=True)
    b2 = ad.Var(rng.normal(size=1) * 0.1, requires_grad=True)
    x = rng.normal(size=(8, n_in))
    y = rng.normal(size=(8, 1))

    def forward():
        return ad.mse(ad.linear(ad.tanh(ad.linear(ad.Var(x), w1, b1)), w2, b2), y)

    loss = forward()
    loss.backward()
    params = [w1, b1, w2, b2]
    numeric = ad.numeric_gradient(lambda: float(forward().data),
                                  [p.data for p in params])
    for p, num in zip(params, numeric):
        assert rel_err(p.grad, num) < 1e-5


def test_elementwise_ops_grads():
    rng = np.random.default_rng(1)
    a = ad.Var(rng.uniform(0.5, 2.0, size=6), requires_grad=True)
    out = ad.vsum(ad.exp(a) + ad.sin(a) * ad.cos(a) - ad.log(a) / a)
    out.backward()

    def f():
        v = a.data
        return float((np.exp(v) + np.sin(v) * np.cos(v) - np.log(v) / v).sum())

    num = ad.numeric_gradient(f, [a.data])[0]
    assert rel_err(a.grad, num) < 1e-6


def test_conv2d_circular_grads():
    rng = np.random.default_rng(2)
    w = ad.Var(rng.normal(size=(3, 2, 3, 3)) * 0.4, requires_grad=True)
    b = ad.Var(rng.normal(size=3) * 0.1, requires_grad=True)
    x = ad.Var(rng.normal(size=(2, 2, 6, 5)), requires_grad=True)
    y = rng.normal(size=(2, 3, 6, 5))

    def forward():
        return ad.mse(ad.tanh(ad.conv2d_circular(x, w, b)), y)

    loss = forward()
    loss.backward()
    nums = ad.numeric_gradient(lambda: float(forward().data),
                               [w.data, b.data, x.data])
    for var, num in zip([w, b, x], nums):
        assert rel_err(var.grad, num) < 1e-5


def test_conv2d_circular_wraps_boundary():
    # one-hot kernel shifted by one: output equals rolled input
    x = np.ascontiguousarray(np.arange(12.0).reshape(1, 1, 3, 4))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 0, 1] = 1.0  # reads the row above
    out = ad.conv2d_circular(ad.Var(x), ad.Var(w), ad.Var(np.zeros(1)))
    assert np.array_equal(out.data[0, 0], np.roll(x[0, 0], 1, axis=0))


def test_take_and_concat_roundtrip_grads():
    rng = np.random.default_rng(3)
    a = ad.Var(rng.normal(size=(5, 4)), requires_grad=True)
    out = ad.concat([a[:, 0:2] * 2.0, a[:, 2:4]], axis=1)
    ad.vsum(out * out).backward()
    expect = 2.0 * a.data.copy()
    expect[:, 0:2] *= 4.0
    assert np.allclose(a.grad, expect)


def test_broadcast_add_unbroadcasts_gradient():
    a = ad.Var(np.zeros((4, 3)), requires_grad=True)
    b = ad.Var(np.zeros(3), requires_grad=True)
    ad.vsum(a + b).backward()
    assert a.grad.shape == (4, 3)
    assert b.grad.shape == (3,)
    assert np.all(b.grad == 4.0)


def test_mean_matches_sum_scaling():
    rng = np.random.default_rng(4)
    a = ad.Var(rng.normal(size=(3, 5)), requires_grad=True)
    ad.mean(a, axis=1).backward(np.ones(3))
    assert np.allclose(a.grad, np.full((3, 5), 1.0 / 5.0))
