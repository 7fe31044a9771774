"""Benchmark generators: sizes, determinism, distributional checks, export."""
import json
import os

import numpy as np
import pytest

from hybridpd import problems
from hybridpd.errors import ConfigurationError
from hybridpd.metrics import eval_d_hat


def test_friedman_default_sizes_and_determinism():
    a = problems.gen_friedman(7)
    b = problems.gen_friedman(7)
    assert (a.train.n, a.val.n, a.test.n) == (300, 300, 600)
    assert a.train.d == 10
    assert np.array_equal(a.train.features, b.train.features)
    assert np.array_equal(a.test.targets, b.test.targets)
    assert a.train.known_feature_indices == (0, 1)


def test_friedman_truth_model_zero_error_noiseless():
    p = problems.gen_friedman(3, noise_sd=0.0)
    assert eval_d_hat(p.truth_model, p.test) == 0.0
    assert eval_d_hat(p.truth_model, p.train) == 0.0


def test_friedman_noise_variance_near_one():
    p = problems.gen_friedman(1, n_train=100000, n_val=10, n_test=10)
    resid = p.train.targets - p.truth_model.predict(p.train.features)
    assert np.var(resid) == pytest.approx(1.0, abs=0.02)


def test_friedman_additive_decomposition_exact():
    p = problems.gen_friedman(5, noise_sd=0.0)
    fk = p.truth_prior.predict_known(p.train.xk, include_gamma=False)[:, 0]
    fa = p.truth_model.predict(p.train.features) - fk
    assert np.allclose(fk + fa, p.train.targets, atol=1e-12)


def test_corr_friedman_scaling_and_sizes():
    p = problems.gen_corr_friedman(2)
    assert (p.train.n, p.val.n, p.test.n) == (300, 300, 600)
    assert np.max(np.abs(p.train.features)) <= 1.0 + 1e-12
    assert np.max(np.abs(p.test.features)) < 2.0  # roughly in [-1, 1]


def test_corr_friedman_covariance_matches_target():
    sigma = problems.corr_friedman_sigma(4)
    assert np.allclose(np.diag(sigma), 0.75)
    off = sigma[~np.eye(10, dtype=bool)]
    assert np.all(np.isin(np.round(np.abs(off), 12), [0.3]))
    assert np.all(np.linalg.eigvalsh(sigma) > 0)
    chol = np.linalg.cholesky(sigma)
    r = np.random.default_rng(0)
    draws = 0.5 + r.standard_normal((100000, 10)) @ chol.T
    assert np.abs(np.cov(draws.T) - sigma).max() < 0.02
    assert np.abs(draws.mean(axis=0) - 0.5).max() < 0.02


def test_corr_linear_split_sizes_and_bias():
    p = problems.gen_corr_linear(0)
    assert (p.train.n, p.val.n, p.test.n) == (50, 50, 600)
    big = problems.gen_corr_linear(1, n_train=100000, n_val=10, n_test=10)
    x, y = big.train.features, big.train.targets
    slope = np.linalg.lstsq(np.c_[x[:, 0], np.ones(len(y))], y, rcond=None)[0][0]
    assert slope == pytest.approx(0.625, abs=0.01)
    both = np.linalg.lstsq(np.c_[x, np.ones(len(y))], y, rcond=None)[0][:2]
    assert both[0] == pytest.approx(-0.5, abs=0.01)
    assert both[1] == pytest.approx(1.0, abs=0.01)


def test_overlapping_structure():
    p = problems.gen_overlapping(0)
    assert (p.train.n, p.val.n, p.test.n) == (50, 50, 600)
    noiseless = problems.gen_overlapping(0, noise_sd=0.0)
    assert eval_d_hat(noiseless.truth_model, noiseless.test) == 0.0
    big = problems.gen_overlapping(2, n_train=100000, n_val=10, n_test=10)
    assert np.var(big.train.features[:, 0]) == pytest.approx(2.0, abs=0.05)


def test_lv_window_arithmetic_full_scale_count():
    # full scale: 100 training trajectories x 181 windows = 18100
    lv = problems.sim_lotka_volterra(0, scale=0.05)
    from hybridpd.schemes_dynamic import WindowSet
    ws = WindowSet(lv.train, lv.window_len, lv.window_stride)
    per_traj = len(ws) // lv.train.n_traj
    assert per_traj == 181
    assert per_traj * 100 == 18100


def test_pendulum_full_scale_window_count():
    pend = problems.sim_pendulum(0, scale=0.05)
    from hybridpd.schemes_dynamic import WindowSet
    ws = WindowSet(pend.train, pend.window_len, pend.window_stride)
    assert len(ws) // pend.train.n_traj == 81
    assert 81 * 100 == 8100


def test_rd_full_scale_window_count():
    rd = problems.sim_reaction_diffusion(0, scale=0.005, n_steps=245)
    from hybridpd.schemes_dynamic import WindowSet
    ws = WindowSet(rd.train, rd.window_len, rd.window_stride)
    assert len(ws) // rd.train.n_traj == 10
    assert 10 * 960 == 9600


def test_dynamic_split_fractions():
    lv = problems.sim_lotka_volterra(3, scale=0.2)  # 40 trajectories
    assert (lv.train.n_traj, lv.val.n_traj, lv.test.n_traj) == (20, 10, 10)
    assert lv.train.horizon == 400
    assert lv.train.dt == pytest.approx(0.05)


def test_lv_truth_dynamics_consistency():
    lv = problems.sim_lotka_volterra(1, scale=0.04, n_steps=50)
    states = lv.train.pooled_states()
    prior_part = lv.truth_prior.predict_state(states, include_gamma=False)
    full = lv.dynamics_true(states)
    residual_part = full - prior_part
    # residual first component must be the constant alpha
    assert np.allclose(residual_part[:, 0], 1.0, atol=1e-12)


def test_pendulum_energy_conserved_undamped():
    p = problems.sim_pendulum(0, scale=0.05, xi=0.0)
    w2 = p.theta_star[0]
    for traj in p.test.trajectories:
        e = w2 * (1 - np.cos(traj[:, 0])) + traj[:, 1] ** 2 / 2
        assert np.max(np.abs(e - e[0])) / max(e[0], 1e-9) < 1e-4


def test_pendulum_same_seed_same_system():
    a = problems.sim_pendulum(5, scale=0.04)
    b = problems.sim_pendulum(5, scale=0.04)
    assert a.meta == b.meta
    assert np.array_equal(a.train.trajectories, b.train.trajectories)


def test_rd_constant_field_zero_laplacian():
    from hybridpd.problems import laplacian_periodic
    assert np.allclose(laplacian_periodic(np.full((3, 8, 8), 2.0), 0.0625), 0.0)


def test_rd_generation_finite_and_shaped():
    rd = problems.sim_reaction_diffusion(0, scale=0.004, n_steps=60)
    assert rd.train.grid_shape == (32, 32)
    assert rd.train.d == 2048
    assert np.all(np.isfinite(rd.train.trajectories))


def test_export_static_csv_roundtrip(tmp_path):
    p = problems.gen_corr_linear(0, n_train=10, n_val=5, n_test=5)
    out = problems.export_static_csv(p, tmp_path / "out")
    path = os.path.join(out, "corr_linear_train.csv")
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (10, 3)
    assert np.allclose(rows[:, :2], p.train.features)
    assert np.allclose(rows[:, 2], p.train.targets)


def test_export_trajectories_manifest(tmp_path):
    lv = problems.sim_lotka_volterra(0, scale=0.04, n_steps=20)
    out = problems.export_trajectories_csv(lv, tmp_path / "lv")
    with open(os.path.join(out, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert manifest["dt"] == pytest.approx(0.05)
    assert manifest["horizon"] == 20
    assert manifest["grid_shape"] is None
    first = manifest["files"]["train"][0]
    rows = np.loadtxt(os.path.join(out, first), delimiter=",", skiprows=1)
    assert np.allclose(rows, lv.train.trajectories[0])


def test_unknown_problem_rejected():
    with pytest.raises(ConfigurationError):
        problems.get_problem("nope", 0)


def make_real_csv(path, n=400, seed=0):
    rng = np.random.default_rng(seed)
    t = rng.uniform(2, 30, n)
    ap = rng.uniform(990, 1030, n)
    rh = rng.uniform(30, 100, n)
    v = rng.uniform(30, 80, n)
    pe = 480 - 2.0 * t + 0.05 * (ap - 1010) - 0.1 * rh + rng.normal(0, 3, n)
    with open(path, "w") as fh:
        fh.write("T,AP,RH,V,PE\n")
        for row in zip(t, ap, rh, v, pe):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return path


class TestRealLoader:
    def test_int_split_sizes_and_standardization(self, tmp_path):
        path = make_real_csv(tmp_path / "ccpp.csv")
        p = problems.load_real(path, "ccpp", "INT", seed=0)
        assert p.train.n == 100 and p.val.n == 100 and p.test.n == 200
        assert p.train.features.mean(axis=0) == pytest.approx(np.zeros(4), abs=1e-6)
        assert p.train.features.std(axis=0) == pytest.approx(np.ones(4), abs=1e-6)
        assert p.train.targets.mean() == pytest.approx(0.0, abs=1e-6)
        assert p.train.targets.std() == pytest.approx(1.0, abs=1e-6)

    def test_ext_split_lowest_quartile(self, tmp_path):
        path = make_real_csv(tmp_path / "ccpp.csv")
        p = problems.load_real(path, "ccpp", "EXT", seed=0)
        assert p.test.n == 100  # 400 // 4
        # EXT test targets sit strictly below every train/val target
        assert p.test.targets.max() < min(p.train.targets.min(),
                                          p.val.targets.min())

    def test_split_disjointness(self, tmp_path):
        path = make_real_csv(tmp_path / "ccpp.csv")
        p = problems.load_real(path, "ccpp", "INT", seed=1)
        idx_train, idx_val, idx_test = p.meta["split_indices"]
        all_idx = idx_train + idx_val + idx_test
        assert len(all_idx) == len(set(all_idx))

    def test_schema_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w") as fh:
            fh.write("A,B\n1,2\n")
        with pytest.raises(ConfigurationError):
            problems.load_real(path, "ccpp")

    def test_ccs_derived_ratio_column(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 250
        cols = ["Cement", "Blast Furnace Slag", "Fly Ash", "Water",
                "Superplasticizer", "Coarse Aggregate", "Fine Aggregate", "Age"]
        data = rng.uniform(1, 100, size=(n, len(cols)))
        strength = data[:, 0] / data[:, 3] * 10 + rng.normal(0, 1, n)
        path = tmp_path / "ccs.csv"
        with open(path, "w") as fh:
            fh.write(",".join(cols) + ",Strength\n")
            for row, s in zip(data, strength):
                fh.write(",".join(repr(float(x)) for x in row) + f",{float(s)!r}\n")
        p = problems.load_real(path, "ccs", "INT", seed=0)
        assert p.meta["columns"][-1] == "Cement/Water"
        assert p.train.known_feature_indices == (8,)
