"""Config-driven experiment orchestration.

Configs are INI-style plain text (see ``configs/`` and the README grammar):

    [problem]   name, plus generator overrides (n_train=..., xi=...)
    [schemes]   names = sequential, alternate, pd, ha_only, fk_to_ha, joint
    [models]    kinds = mlp, gb, rf | filters = unfiltered, filtered
    [training]  scheme hyperparameters (epochs, lr, alternate_epochs, ...)
    [seeds]     replicates = 10 | master_seed = 0
    [run]       desk_scale_factor = 1.0 | out = runs/<name>

For every (seed x scheme x model x filter) cell one JSON-lines record is
emitted; failed replicates carry an ``error`` field and never abort the
run. Records are sorted by cell before writing, so output bytes depend only
on (config, master seed).
"""
from __future__ import annotations

import configparser
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .data import ExperimentReport
from .dynamics import IntegratorCfg
from .errors import ConfigurationError
from .hybrid import GbResidual, MlpResidual, RfResidual
from .metrics import (eval_d_hat, eval_dk_hat, eval_log_traj_mse, eval_rmae,
                      eval_traj_mse)
from .nets import ConvNet, ConvSpec, Mlp, MlpSpec
from . import problems as problems_mod
from . import schemes_dynamic as dyn
from . import schemes_static as stat
from .schemes_static import PriorFitCfg

STATIC_SCHEMES = ("sequential", "alternate", "pd", "ha_only", "fk_to_ha")
DYNAMIC_SCHEMES = ("joint", "alternate", "pd", "ha_only", "fk_to_ha")

# Appendix-style per-problem model defaults.
MLP_WIDTHS = {"friedman": 15, "corr_friedman": 15, "corr_linear": 10,
              "overlapping": 10, "ccpp_int": 30, "ccpp_ext": 30,
              "ccs_int": 30, "ccs_ext": 30}
GB_TREES = {"friedman": 700, "corr_friedman": 700, "corr_linear": 400,
            "overlapping": 400, "ccpp_int": 300, "ccpp_ext": 300,
            "ccs_int": 300, "ccs_ext": 300}
RF_TREES = {"friedman": 500, "corr_friedman": 500, "corr_linear": 500,
            "overlapping": 500, "ccpp_int": 200, "ccpp_ext": 200,
            "ccs_int": 200, "ccs_ext": 200}

DYN_DEFAULTS = {
    "lotka_volterra": dict(epochs=500, lr=5e-4, width=64, hidden=2,
                           pd_block_epochs=50, pd_final_epochs=150,
                           init_epochs=150, dt=0.05),
    "pendulum": dict(epochs=500, lr=5e-4, width=64, hidden=2,
                     pd_block_epochs=50, pd_final_epochs=150,
                     init_epochs=150, dt=0.05),
    "reaction_diffusion": dict(epochs=1000, lr=1e-4, hidden_channels=8,
                               layers=3, pd_block_epochs=100,
                               pd_final_epochs=1000, init_epochs=150, dt=0.01,
                               train_dtype="float32", val_traj_cap=8,
                               val_every=10),
}


@dataclass(frozen=True)
class Cell:
    problem: str
    scheme: str
    model: str
    filtered: bool
    seed: int

    def sort_key(self):
        return (self.problem, self.scheme, self.model, self.filtered, self.seed)


def parse_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config not found: {path}")
    cfg = {section: dict(parser.items(section)) for section in parser.sections()}
    if "problem" not in cfg or "name" not in cfg["problem"]:
        raise ConfigurationError("config needs a [problem] section with a name")
    return cfg


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _build_residual(problem, model_kind, filtered, seed, training):
    name = problem.name
    input_filter = problem.train.known_feature_indices if filtered else ()
    if model_kind == "mlp":
        return MlpResidual(
            input_dim=problem.train.d,
            hidden_layers=int(training.get("mlp_hidden", 2)),
            width=int(training.get("mlp_width", MLP_WIDTHS.get(name, 15))),
            epochs=int(training.get("mlp_epochs", 3000)),
            lr=float(training.get("mlp_lr", 0.005)),
            input_filter=input_filter, seed=seed)
    if model_kind in ("gb", "gradient_boosting"):
        return GbResidual(
            n_trees=int(training.get("gb_trees", GB_TREES.get(name, 400))),
            max_depth=int(training.get("gb_depth", 2)),
            shrinkage=float(training.get("gb_shrinkage", 0.1)),
            input_filter=input_filter, seed=seed)
    if model_kind in ("rf", "random_forest"):
        return RfResidual(
            n_trees=int(training.get("rf_trees", RF_TREES.get(name, 500))),
            min_samples_split=int(training.get("rf_mss", 5)),
            input_filter=input_filter, seed=seed)
    raise ConfigurationError(f"unknown model kind {model_kind!r}")


def _static_replicate(cell: Cell, problem_overrides, training):
    problem = problems_mod.get_problem(cell.problem, cell.seed, **problem_overrides)
    prior_cfg = PriorFitCfg(
        epochs=int(training.get("prior_epochs", 2000)),
        lr=float(training.get("prior_lr", 0.005)),
        seed=cell.seed)
    if cell.scheme == "pd" and cell.filtered:
        raise ConfigurationError("PD-based training cannot filter x_k")
    residual = _build_residual(problem, cell.model, cell.filtered, cell.seed, training)
    is_net = cell.model == "mlp"
    alternate_epochs = int(training.get(
        "alternate_epochs", 1500 if is_net else 150))
    if cell.scheme == "sequential":
        model = stat.sequential_fit(problem.prior_form, residual, problem.train,
                                    problem.val, prior_cfg)
    elif cell.scheme == "alternate":
        model = stat.alternate_fit(problem.prior_form, residual, problem.train,
                                   problem.val, alternate_epochs, prior_cfg)
    elif cell.scheme == "pd":
        model = stat.pd_fit(problem.prior_form, residual, problem.train,
                            problem.val, int(training.get("pd_repeats", 5)),
                            prior_cfg)
    elif cell.scheme == "ha_only":
        model = stat.data_driven_fit(residual, problem.train, problem.val)
    elif cell.scheme == "fk_to_ha":
        if problem.truth_prior is None:
            raise ConfigurationError("fk_to_ha needs a known true prior")
        model = stat.oracle_residual_fit(problem.truth_prior, residual,
                                         problem.train, problem.val)
    else:
        raise ConfigurationError(f"unknown static scheme {cell.scheme!r}")

    metrics = {"d_hat": eval_d_hat(model, problem.test)}
    if model.prior is not None and problem.truth_prior is not None \
            and cell.scheme not in ("fk_to_ha",):
        metrics["dk_hat"] = eval_dk_hat(model.prior, problem.truth_prior,
                                        problem.test)
        if problem.theta_star is not None \
                and model.prior.theta.shape == problem.theta_star.shape \
                and np.all(problem.theta_star != 0):
            metrics["rmae"] = eval_rmae(model.prior.theta, problem.theta_star)
    return metrics


def _make_dyn_net_factory(problem, training, defaults, dtype=np.float64):
    if problem.train.grid_shape is None:
        spec = MlpSpec(problem.train.d, problem.train.d,
                       hidden_layers=int(training.get("mlp_hidden", defaults.get("hidden", 2))),
                       width=int(training.get("mlp_width", defaults.get("width", 64))))
        return lambda seed: Mlp(spec, seed=seed, dtype=dtype)
    spec = ConvSpec(problem.train.channels, problem.train.channels,
                    hidden_channels=int(training.get("hidden_channels",
                                                     defaults.get("hidden_channels", 8))),
                    layers=int(training.get("conv_layers", defaults.get("layers", 3))))
    return lambda seed: ConvNet(spec, seed=seed, dtype=dtype)


def _dynamic_replicate(cell: Cell, problem_overrides, training, scale):
    overrides = dict(problem_overrides)
    problem = problems_mod.get_problem(cell.problem, cell.seed, scale=scale,
                                       **overrides)
    defaults = DYN_DEFAULTS[cell.problem]
    cfg = dyn.DynTrainCfg(
        epochs=int(training.get("epochs", defaults["epochs"])),
        lr=float(training.get("lr", defaults["lr"])),
        batch_size=int(training.get("batch_size", 32)),
        val_every=int(training.get("val_every", defaults.get("val_every", 5))),
        seed=cell.seed,
        integrator=IntegratorCfg("euler", defaults["dt"], 1),
        init_epochs=int(training.get("init_epochs", defaults["init_epochs"])),
        pd_repeats=int(training.get("pd_repeats", 10)),
        pd_block_epochs=int(training.get("pd_block_epochs", defaults["pd_block_epochs"])),
        pd_final_epochs=int(training.get("pd_final_epochs", defaults["pd_final_epochs"])),
        pd_background_cap=int(training.get("pd_background_cap", 512)),
        pd_query_cap=int(training.get("pd_query_cap", 4096)),
        prior_fit=PriorFitCfg(epochs=int(training.get("prior_epochs", 2000)),
                              lr=float(training.get("prior_lr", 0.005)),
                              seed=cell.seed),
        train_dtype=str(training.get("train_dtype",
                                     defaults.get("train_dtype", "float64"))),
        val_traj_cap=defaults.get("val_traj_cap"),
    )
    cfg = cfg.scaled(scale)
    make_net = _make_dyn_net_factory(problem, training, defaults,
                                     np.dtype(cfg.train_dtype))
    if cell.scheme == "joint":
        model, _ = dyn.joint_fit(problem, cfg, make_net)
    elif cell.scheme == "alternate":
        model, _ = dyn.alternate_fit_dyn(
            problem, cfg, make_net,
            init_prior=training.get("init_prior", "true").lower() != "false")
    elif cell.scheme == "pd":
        model, _ = dyn.pd_fit_dyn(problem, cfg, make_net)
    elif cell.scheme == "ha_only":
        model, _ = dyn.fit_node(problem, cfg, make_net)
    elif cell.scheme == "fk_to_ha":
        model, _ = dyn.oracle_residual_fit_dyn(problem, cfg, make_net)
    else:
        raise ConfigurationError(f"unknown dynamic scheme {cell.scheme!r}")

    metrics = {"d_hat": eval_traj_mse(model, problem.test, cfg.integrator)}
    metrics["log_d_hat"] = eval_log_traj_mse(model, problem.test, cfg.integrator)
    if model.prior is not None and cell.scheme != "fk_to_ha":
        metrics["dk_hat"] = eval_dk_hat(model.prior, problem.truth_prior,
                                        problem.test)
    return metrics


def run_cell(cell: Cell, problem_overrides, training, scale):
    started = time.time()
    try:
        if cell.problem in problems_mod.DYNAMIC_GENERATORS:
            metrics = _dynamic_replicate(cell, problem_overrides, training, scale)
        else:
            metrics = _static_replicate(cell, problem_overrides, training)
        error = None
    except Exception as exc:  # crash isolation: keep other replicates alive
        metrics = {}
        error = f"{type(exc).__name__}: {exc}"
    report = ExperimentReport(
        scheme=cell.scheme, seed=cell.seed, metrics=metrics,
        wall_time_s=time.time() - started,
        config={"problem": cell.problem, "model": cell.model,
                "filtered": cell.filtered, "scale": scale,
                "dk_points": "test_xk"},
        error=error)
    return report


def expand_cells(cfg):
    prob = cfg["problem"]["name"]
    schemes = _csv_list(cfg.get("schemes", {}).get("names", "pd"))
    models = _csv_list(cfg.get("models", {}).get("kinds", "mlp"))
    filters = _csv_list(cfg.get("models", {}).get("filters", "unfiltered"))
    n_rep = int(cfg.get("seeds", {}).get("replicates", 1))
    master = int(cfg.get("seeds", {}).get("master_seed", 0))
    cells = []
    for scheme in schemes:
        for model in models:
            for filt in filters:
                filtered = filt == "filtered"
                if scheme in ("ha_only",) and filtered:
                    continue  # filtering is a hybrid-only notion
                if scheme == "pd" and filtered:
                    continue  # PD undefined under filtering
                for rep in range(n_rep):
                    cells.append(Cell(prob, scheme, model, filtered, master + rep))
    return cells


def run_experiment(config_path, out_dir=None, scale=None, master_seed=None,
                   workers=1):
    """Execute every cell of a config; returns (records_path, reports)."""
    cfg = parse_config(config_path)
    run_cfg = cfg.get("run", {})
    scale = float(scale if scale is not None else run_cfg.get("desk_scale_factor", 1.0))
    if master_seed is not None:
        cfg.setdefault("seeds", {})["master_seed"] = str(master_seed)
    out_dir = out_dir or run_cfg.get("out") or "runs/" + os.path.splitext(
        os.path.basename(config_path))[0]
    os.makedirs(out_dir, exist_ok=True)

    prob_overrides = {k: _parse_override(v) for k, v in cfg["problem"].items()
                      if k not in ("name", "csv_path")}
    name = cfg["problem"]["name"]
    if name.startswith(("ccpp", "ccs")):
        # ingest once; real problems are addressed via problem name + path
        prob_overrides["path"] = cfg["problem"]["csv_path"]
    training = cfg.get("training", {})
    cells = sorted(expand_cells(cfg), key=Cell.sort_key)

    if workers > 1:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(workers) as pool:
            reports = pool.starmap(
                run_cell, [(c, prob_overrides, training, scale) for c in cells])
    else:
        reports = [run_cell(c, prob_overrides, training, scale) for c in cells]

    records_path = os.path.join(out_dir, "records.jsonl")
    with open(records_path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(report.to_json_line() + "\n")
    summary_path = os.path.join(out_dir, "summary.csv")
    emit_summary(records_path, summary_path)
    return records_path, reports


def _parse_override(text):
    try:
        return json.loads(text)
    except (ValueError, TypeError):
        return text


def load_records(records_path):
    with open(records_path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def emit_summary(records_path, out_path=None):
    """Aggregate records into one mean +- sd row per cell (population sd).

    Rows are ordered by (problem, scheme, model, filtered); all-failed cells
    are marked. Returns the summary as a list of dicts and writes CSV when
    out_path is given.
    """
    records = load_records(records_path)
    if not records:
        raise ConfigurationError("no records to summarize")
    groups = {}
    for rec in records:
        conf = rec.get("config", {})
        key = (conf.get("problem", "?"), rec["scheme"], conf.get("model", "?"),
               bool(conf.get("filtered", False)))
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        recs = groups[key]
        ok = [r for r in recs if "error" not in r]
        row = {"problem": key[0], "scheme": key[1], "model": key[2],
               "filtered": str(key[3]).lower(), "n": len(ok),
               "n_failed": len(recs) - len(ok)}
        if not ok:
            row["status"] = "all_failed"
        else:
            row["status"] = "ok"
            # timing stays in the per-replicate records only, so summaries
            # are byte-identical across reruns of the same (config, seed)
            for metric in ("d_hat", "dk_hat", "rmae", "log_d_hat"):
                vals = [r[metric] for r in ok if r.get(metric) is not None]
                if vals:
                    row[f"{metric}_mean"] = repr(float(np.mean(vals)))
                    row[f"{metric}_sd"] = repr(float(np.std(vals)))  # population sd
        rows.append(row)
    if out_path:
        cols = ["problem", "scheme", "model", "filtered", "n", "n_failed", "status"]
        for metric in ("d_hat", "dk_hat", "rmae", "log_d_hat"):
            cols += [f"{metric}_mean", f"{metric}_sd"]
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("# aggregate uses population sd (ddof=0)\n")
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(str(row.get(c, "")) for c in cols) + "\n")
    return rows
