"""Seeded benchmark generators: synthetic regression problems, simulated
dynamical systems, and real-dataset ingestion.

Every generator is a pure function of its seed; per-split RNG streams keep
validation/test draws identical when only the training size changes.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, TrajectoryDataset
from .dynamics import IntegratorCfg, integrate
from .errors import ConfigurationError
from .priors import (LinearForm, LotkaVolterraForm, PendulumForm, Prior,
                     QuadraticForm, ReactionDiffusionForm, SineProductForm)


@dataclass
class StaticProblem:
    name: str
    train: Dataset
    val: Dataset
    test: Dataset
    prior_form: object
    theta_star: np.ndarray | None
    truth_model: object | None = None
    meta: dict = field(default_factory=dict)

    @property
    def truth_prior(self):
        if self.theta_star is None:
            return None
        return Prior(self.prior_form, self.theta_star,
                     np.zeros(self.prior_form.gamma_dim))


@dataclass
class DynamicProblem:
    name: str
    train: TrajectoryDataset
    val: TrajectoryDataset
    test: TrajectoryDataset
    prior_form: object
    theta_star: np.ndarray
    dynamics_true: object
    window_len: int
    window_stride: int
    meta: dict = field(default_factory=dict)

    @property
    def truth_prior(self):
        return Prior(self.prior_form, self.theta_star,
                     np.zeros(self.prior_form.gamma_dim))

    @property
    def obs_dt(self):
        return self.train.dt


class _Callable:
    def __init__(self, fn):
        self._fn = fn

    def predict(self, x):
        return self._fn(np.asarray(x, dtype=np.float64))


def _rng(seed, stream):
    return np.random.default_rng([int(seed), int(stream)])


# --- Friedman ----------------------------------------------------------------

FRIEDMAN_THETA_CLASSIC = np.array([10.0, np.pi, 20.0, 0.5, 10.0, 5.0])


def draw_friedman_theta(seed):
    """Per-dataset coefficient draw around the classic constants."""
    r = _rng(seed, 3)
    lo = np.array([8.0, 0.8 * np.pi, 16.0, 0.3, 8.0, 4.0])
    hi = np.array([12.0, 1.2 * np.pi, 24.0, 0.7, 12.0, 6.0])
    return r.uniform(lo, hi)


def _friedman_y(x, theta, eps):
    return (theta[0] * np.sin(theta[1] * x[:, 0] * x[:, 1])
            + theta[2] * (x[:, 2] - theta[3]) ** 2
            + theta[4] * x[:, 3] + theta[5] * x[:, 4] + eps)


def gen_friedman(seed, n_train=300, n_val=300, n_test=600, theta=None,
                 noise_sd=1.0):
    """Ten U(0,1) inputs; the sine interaction term is the known prior."""
    theta = np.asarray(theta, float) if theta is not None else draw_friedman_theta(seed)
    splits = {}
    for stream, (tag, n) in enumerate(
            [("val", n_val), ("test", n_test), ("train", n_train)]):
        r = _rng(seed, stream)
        x = r.uniform(0.0, 1.0, size=(n, 10))
        eps = r.normal(0.0, noise_sd, size=n) if noise_sd > 0 else np.zeros(n)
        splits[tag] = Dataset(x, _friedman_y(x, theta, eps), (0, 1), tag)
    form = SineProductForm((0, 1))
    truth = _Callable(lambda x: _friedman_y(x, theta, 0.0))
    return StaticProblem("friedman", splits["train"], splits["val"], splits["test"],
                         form, theta[:2].copy(), truth, {"theta": theta.tolist()})


def corr_friedman_sigma(seed, max_attempts=50):
    """Covariance with var 0.75 and +-0.3 covariances of random sign.

    Signs come from a random sign vector (sign_ij = s_i * s_j), the only
    random +-pattern family that keeps a 10-d matrix positive definite at
    this covariance strength; a PD check with resampling stays as a guard.
    """
    for attempt in range(max_attempts):
        r = _rng(seed, 4 + 1000 * attempt)
        s = r.choice([-1.0, 1.0], size=10)
        sigma = 0.3 * np.outer(s, s)
        np.fill_diagonal(sigma, 0.75)
        if np.all(np.linalg.eigvalsh(sigma) > 1e-9):
            return sigma
    raise ConfigurationError("could not draw a positive-definite covariance")


def gen_corr_friedman(seed, n_train=300, n_val=300, n_test=600, theta=None,
                      noise_sd=1.0):
    """Friedman structure on correlated normal inputs scaled to ~[-1, 1].

    Inputs are scaled by the per-feature max |x| of the training split; the
    targets are generated from the scaled inputs so theta_star stays exact.
    """
    theta = np.asarray(theta, float) if theta is not None else draw_friedman_theta(seed)
    sigma = corr_friedman_sigma(seed)
    chol = np.linalg.cholesky(sigma)
    raw = {}
    for stream, (tag, n) in enumerate(
            [("val", n_val), ("test", n_test), ("train", n_train)]):
        r = _rng(seed, stream)
        raw[tag] = 0.5 + r.standard_normal((n, 10)) @ chol.T
    scale = np.max(np.abs(raw["train"]), axis=0)
    splits = {}
    for stream, tag in enumerate(["val", "test", "train"]):
        x = raw[tag] / scale
        r = _rng(seed, 5 + stream)
        eps = r.normal(0.0, noise_sd, size=x.shape[0]) if noise_sd > 0 else 0.0
        splits[tag] = Dataset(x, _friedman_y(x, theta, eps), (0, 1), tag)
    form = SineProductForm((0, 1))
    truth = _Callable(lambda x: _friedman_y(x, theta, 0.0))
    return StaticProblem("corr_friedman", splits["train"], splits["val"],
                         splits["test"], form, theta[:2].copy(), truth,
                         {"theta": theta.tolist(), "sigma": sigma.tolist()})


# --- Correlated Linear & Overlapping -----------------------------------------

CORR_LINEAR_SIGMA = np.array([[2.0, 2.25], [2.25, 3.0]])
CORR_LINEAR_BETA = np.array([-0.5, 1.0])


def _corr_pair(r, n):
    return r.standard_normal((n, 2)) @ np.linalg.cholesky(CORR_LINEAR_SIGMA).T


def gen_corr_linear(seed, n_train=50, n_val=50, n_test=600, noise_sd=0.5):
    """y = -0.5 x0 + x1 + eps with cov(x0, x1) = 2.25 and var(x0) = 2, so a
    regression of y on x0 alone lands near slope 0.625 (sign flipped)."""
    splits = {}
    for stream, (tag, n) in enumerate(
            [("val", n_val), ("test", n_test), ("train", n_train)]):
        r = _rng(seed, stream)
        x = _corr_pair(r, n)
        y = x @ CORR_LINEAR_BETA + r.normal(0.0, noise_sd, size=n)
        splits[tag] = Dataset(x, y, (0,), tag)
    form = LinearForm((0,))
    truth = _Callable(lambda x: x @ CORR_LINEAR_BETA)
    return StaticProblem("corr_linear", splits["train"], splits["val"],
                         splits["test"], form, np.array([-0.5]), truth,
                         {"beta": CORR_LINEAR_BETA.tolist()})


OVERLAPPING_COEFFS = {"beta": 0.2, "gamma": 1.5, "delta": 1.0}


def gen_overlapping(seed, n_train=50, n_val=50, n_test=600, noise_sd=0.5):
    """y = 0.2 x0^2 + sin(1.5 x0) + x1 + eps; the prior only covers the
    quadratic part, so the residual must overlap it on x0."""
    b, g, d = 0.2, 1.5, 1.0
    splits = {}
    for stream, (tag, n) in enumerate(
            [("val", n_val), ("test", n_test), ("train", n_train)]):
        r = _rng(seed, stream)
        x = _corr_pair(r, n)
        y = b * x[:, 0] ** 2 + np.sin(g * x[:, 0]) + d * x[:, 1] \
            + r.normal(0.0, noise_sd, size=n)
        splits[tag] = Dataset(x, y, (0,), tag)
    form = QuadraticForm((0,))
    truth = _Callable(lambda x: b * x[:, 0] ** 2 + np.sin(g * x[:, 0]) + d * x[:, 1])
    return StaticProblem("overlapping", splits["train"], splits["val"],
                         splits["test"], form, np.array([b]), truth,
                         dict(OVERLAPPING_COEFFS))


# --- dynamical systems --------------------------------------------------------

GEN_CFG = {"lotka_volterra": IntegratorCfg("rk4", 0.05, 50),
           "pendulum": IntegratorCfg("rk4", 0.05, 50),
           "reaction_diffusion": IntegratorCfg("rk4", 0.01, 10)}


def _split_trajs(trajs, dt, grid_shape=None):
    n = trajs.shape[0]
    n_train = int(round(0.5 * n))
    n_val = int(round(0.25 * n))
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise ConfigurationError(f"too few trajectories to split: {n}")
    return (TrajectoryDataset(trajs[:n_train], dt, grid_shape, "train"),
            TrajectoryDataset(trajs[n_train:n_train + n_val], dt, grid_shape, "val"),
            TrajectoryDataset(trajs[n_train + n_val:], dt, grid_shape, "test"))


def lv_dynamics(alpha=1.0, beta=1.0, gamma=1.0, delta=1.0):
    def deriv(x):
        p, q = x[:, 0], x[:, 1]
        return np.stack([alpha - beta * np.exp(q), -delta + gamma * np.exp(p)], axis=1)
    return deriv


def sim_lotka_volterra(seed, n_traj=200, scale=1.0, n_steps=400):
    """Log-state prey/predator trajectories; the prior is the prey equation's
    -beta * e^q term."""
    n = max(4, int(round(n_traj * scale)))
    r = _rng(seed, 10)
    pops = r.uniform(0.0, 1.0, size=(n, 2))
    while np.any(pops < 1e-4):
        pops = np.where(pops < 1e-4, r.uniform(0.0, 1.0, size=pops.shape), pops)
    x0 = np.log(pops)
    deriv = lv_dynamics()
    trajs = integrate(deriv, x0, GEN_CFG["lotka_volterra"], n_steps)
    train, val, test = _split_trajs(trajs, GEN_CFG["lotka_volterra"].dt)
    return DynamicProblem("lotka_volterra", train, val, test,
                          LotkaVolterraForm(), np.array([1.0]), deriv,
                          window_len=41, window_stride=2,
                          meta={"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "delta": 1.0})


def pendulum_dynamics(omega0, xi):
    def deriv(x):
        return np.stack([x[:, 1], -omega0 ** 2 * np.sin(x[:, 0]) - xi * x[:, 1]],
                        axis=1)
    return deriv


def sim_pendulum(seed, n_traj=200, scale=1.0, n_steps=200, xi=None, omega0=None):
    """Damped pendulum; (omega0, xi) drawn once per seed, the prior covers
    the frictionless part with theta* = omega0^2."""
    n = max(4, int(round(n_traj * scale)))
    r = _rng(seed, 11)
    w = float(r.uniform(0.785, 3.14)) if omega0 is None else float(omega0)
    x = float(r.uniform(0.0, 0.8)) if xi is None else float(xi)
    angles = r.uniform(-np.pi / 2, np.pi / 2, size=n)
    vels = r.uniform(0.0, 0.1, size=n)
    x0 = np.stack([angles, vels], axis=1)
    deriv = pendulum_dynamics(w, x)
    trajs = integrate(deriv, x0, GEN_CFG["pendulum"], n_steps)
    train, val, test = _split_trajs(trajs, GEN_CFG["pendulum"].dt)
    return DynamicProblem("pendulum", train, val, test,
                          PendulumForm(), np.array([w ** 2]), deriv,
                          window_len=41, window_stride=2,
                          meta={"omega0": w, "xi": x})


def laplacian_periodic(fields, dx):
    """5-point stencil with circular boundary on (..., H, W) arrays."""
    return (np.roll(fields, 1, axis=-2) + np.roll(fields, -1, axis=-2)
            + np.roll(fields, 1, axis=-1) + np.roll(fields, -1, axis=-1)
            - 4.0 * fields) / dx ** 2


def rd_dynamics(alpha=1e-3, beta=5e-3, gamma=5e-3, grid=(32, 32), dx=None):
    """Channel-first field dynamics on flattened (2 * H * W) state rows."""
    h, w = grid
    dx = dx if dx is not None else 2.0 / w

    def deriv(x):
        n = x.shape[0]
        uv = x.reshape(n, 2, h, w)
        u, v = uv[:, 0], uv[:, 1]
        du = alpha * laplacian_periodic(u, dx) + u - u ** 3 - gamma - v
        dv = beta * laplacian_periodic(v, dx) + u - v
        return np.stack([du, dv], axis=1).reshape(n, 2 * h * w)
    return deriv


def sim_reaction_diffusion(seed, n_traj=1920, scale=1.0, n_steps=245,
                           grid=(32, 32)):
    """Two-species reaction-diffusion on a periodic 32x32 grid; the prior is
    the pair of diffusion terms with theta* = (alpha, beta)."""
    n = max(4, int(round(n_traj * scale)))
    r = _rng(seed, 12)
    h, w = grid
    x0 = r.uniform(0.0, 1.0, size=(n, 2 * h * w))
    deriv = rd_dynamics(grid=grid)
    trajs = integrate(deriv, x0, GEN_CFG["reaction_diffusion"], n_steps)
    train, val, test = _split_trajs(trajs, GEN_CFG["reaction_diffusion"].dt, grid)
    return DynamicProblem("reaction_diffusion", train, val, test,
                          ReactionDiffusionForm(grid), np.array([1e-3, 5e-3]),
                          deriv, window_len=51, window_stride=20,
                          meta={"alpha": 1e-3, "beta": 5e-3, "gamma": 5e-3,
                                "grid": list(grid)})


# --- real datasets -------------------------------------------------------------

REAL_SCHEMAS = {
    "ccpp": {"columns": ["T", "AP", "RH", "V"], "target": "PE", "xk": "T"},
    "ccs": {"columns": ["Cement", "Blast Furnace Slag", "Fly Ash", "Water",
                        "Superplasticizer", "Coarse Aggregate",
                        "Fine Aggregate", "Age"],
            "target": "Strength", "xk": "Cement/Water"},
}


def load_real(path, dataset_id, mode="INT", seed=0, n_train=100, n_val=100):
    """Load a CSV benchmark, standardize on the training split, and cut
    interpolation (random) or extrapolation (lowest-output test) splits."""
    if dataset_id not in REAL_SCHEMAS:
        raise ConfigurationError(f"unknown dataset id {dataset_id!r}")
    if mode not in ("INT", "EXT"):
        raise ConfigurationError("mode must be INT or EXT")
    schema = REAL_SCHEMAS[dataset_id]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in schema["columns"] + [schema["target"]]
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigurationError(f"CSV missing columns: {missing}")
        rows = [[float(rec[c]) for c in schema["columns"]] + [float(rec[schema["target"]])]
                for rec in reader]
    data = np.asarray(rows, dtype=np.float64)
    x, y = data[:, :-1], data[:, -1]
    columns = list(schema["columns"])
    if dataset_id == "ccs":
        ratio = x[:, columns.index("Cement")] / x[:, columns.index("Water")]
        x = np.c_[x, ratio]
        columns.append("Cement/Water")
    xk_col = columns.index(schema["xk"])
    n = x.shape[0]
    if n < n_train + n_val + 10:
        raise ConfigurationError(f"dataset too small: {n} rows")

    r = _rng(seed, 20)
    if mode == "INT":
        perm = r.permutation(n)
        idx_train = perm[:n_train]
        idx_val = perm[n_train:n_train + n_val]
        idx_test = perm[n_train + n_val:]
    else:
        order = np.argsort(y, kind="stable")
        idx_test = order[: n // 4]
        rest = order[n // 4:]
        perm = r.permutation(rest.shape[0])
        idx_train = rest[perm[:n_train]]
        idx_val = rest[perm[n_train:n_train + n_val]]
    mu_x = x[idx_train].mean(axis=0)
    sd_x = x[idx_train].std(axis=0)
    sd_x[sd_x == 0] = 1.0
    mu_y = y[idx_train].mean()
    sd_y = y[idx_train].std() or 1.0

    def cut(idx, tag):
        return Dataset((x[idx] - mu_x) / sd_x, (y[idx] - mu_y) / sd_y,
                       (xk_col,), tag)

    form = LinearForm((xk_col,))
    return StaticProblem(f"{dataset_id}_{mode.lower()}", cut(idx_train, "train"),
                         cut(idx_val, "val"), cut(idx_test, "test"), form, None,
                         None, {"mode": mode, "columns": columns,
                                "n_rows": int(n), "xk": schema["xk"],
                                "splits_disjoint": True,
                                "split_indices": [idx_train.tolist(),
                                                  idx_val.tolist(),
                                                  idx_test.tolist()]})


# --- registry & export ----------------------------------------------------------

STATIC_GENERATORS = {
    "friedman": gen_friedman,
    "corr_friedman": gen_corr_friedman,
    "corr_linear": gen_corr_linear,
    "overlapping": gen_overlapping,
}

DYNAMIC_GENERATORS = {
    "lotka_volterra": sim_lotka_volterra,
    "pendulum": sim_pendulum,
    "reaction_diffusion": sim_reaction_diffusion,
}


def get_problem(name, seed, scale=1.0, **overrides):
    if name in STATIC_GENERATORS:
        return STATIC_GENERATORS[name](seed, **overrides)
    if name in DYNAMIC_GENERATORS:
        return DYNAMIC_GENERATORS[name](seed, scale=scale, **overrides)
    if name in REAL_SCHEMAS:
        path = overrides.pop("path", None)
        if path is None:
            raise ConfigurationError(f"real dataset {name!r} needs a csv path")
        mode = str(overrides.pop("mode", "INT")).upper()
        return load_real(path, name, mode=mode, seed=seed, **overrides)
    raise ConfigurationError(f"unknown problem {name!r}")


def export_static_csv(problem: StaticProblem, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for split in ("train", "val", "test"):
        data = getattr(problem, split)
        path = os.path.join(out_dir, f"{problem.name}_{split}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j}" for j in range(data.d)] + ["y"])
            for row, target in zip(data.features, data.targets):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])
    return out_dir


def export_trajectories_csv(problem: DynamicProblem, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"name": problem.name, "dt": problem.obs_dt,
                "horizon": problem.train.horizon,
                "grid_shape": list(problem.train.grid_shape) if problem.train.grid_shape else None,
                "files": {}}
    for split in ("train", "val", "test"):
        data = getattr(problem, split)
        files = []
        for i in range(data.n_traj):
            path = os.path.join(out_dir, f"{problem.name}_{split}_{i:04d}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"s{j}" for j in range(data.d)])
                for row in data.trajectories[i]:
                    writer.writerow([repr(float(v)) for v in row])
            files.append(os.path.basename(path))
        manifest["files"][split] = files
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return out_dir
