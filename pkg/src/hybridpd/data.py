"""Core dataset containers and the per-replicate experiment record."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

SPLIT_TAGS = ("train", "val", "test")


@dataclass(frozen=True)
class Dataset:
    """Supervised sample (x_i, y_i) with the known-feature index set attached.

    Immutable after construction; arrays are copied and write-locked so
    instances are safe to share across threads.
    """

    features: np.ndarray
    targets: np.ndarray
    known_feature_indices: tuple
    split_tag: str = "train"

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        targs = np.array(self.targets, dtype=np.float64).reshape(-1)
        if feats.ndim != 2:
            raise ConfigurationError("features must be an N x d matrix")
        if feats.shape[0] != targs.shape[0]:
            raise ConfigurationError("features and targets disagree on N")
        if feats.shape[0] < 1:
            raise ConfigurationError("dataset must contain at least one row")
        if not (np.all(np.isfinite(feats)) and np.all(np.isfinite(targs))):
            raise ConfigurationError("dataset contains NaN or Inf entries")
        known = tuple(int(i) for i in self.known_feature_indices)
        if len(known) == 0:
            raise ConfigurationError("known_feature_indices must be non-empty")
        if any(i < 0 or i >= feats.shape[1] for i in known):
            raise ConfigurationError("known_feature_indices out of bounds")
        if self.split_tag not in SPLIT_TAGS:
            raise ConfigurationError(f"split_tag must be one of {SPLIT_TAGS}")
        feats.setflags(write=False)
        targs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)
        object.__setattr__(self, "known_feature_indices", known)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def xk(self):
        return self.features[:, list(self.known_feature_indices)]

    def with_targets(self, new_targets):
        return Dataset(self.features, new_targets, self.known_feature_indices,
                       self.split_tag)


@dataclass(frozen=True)
class TrajectoryDataset:
    """Batch of observed state trajectories sharing dt and horizon.

    trajectories: (n_traj, T+1, d) stacked states; field-valued states are
    flattened to d = channels * H * W with grid_shape recording (H, W).
    """

    trajectories: np.ndarray
    dt: float
    grid_shape: tuple | None = None
    split_tag: str = "train"

    def __post_init__(self):
        trajs = np.array(self.trajectories, dtype=np.float64)
        if trajs.ndim != 3:
            raise ConfigurationError("trajectories must be (n_traj, T+1, d)")
        if trajs.shape[1] < 2:
            raise ConfigurationError("horizon must be >= 1 step")
        if not np.all(np.isfinite(trajs)):
            raise ConfigurationError("trajectories contain NaN or Inf entries")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.grid_shape is not None:
            gh, gw = self.grid_shape
            if trajs.shape[2] % (gh * gw) != 0:
                raise ConfigurationError("grid_shape does not divide state dim")
            object.__setattr__(self, "grid_shape", (int(gh), int(gw)))
        trajs.setflags(write=False)
        object.__setattr__(self, "trajectories", trajs)

    @property
    def n_traj(self):
        return self.trajectories.shape[0]

    @property
    def horizon(self):
        return self.trajectories.shape[1] - 1

    @property
    def d(self):
        return self.trajectories.shape[2]

    @property
    def channels(self):
        if self.grid_shape is None:
            return None
        return self.d // (self.grid_shape[0] * self.grid_shape[1])

    def pooled_states(self):
        """All observed states stacked as one (n_traj * (T+1), d) matrix."""
        return self.trajectories.reshape(-1, self.d)


REPORT_FIELDS = ("scheme", "seed", "d_hat", "dk_hat", "rmae", "log_d_hat", "wall_time_s")


@dataclass
class ExperimentReport:
    """One replicate's metrics; serializes to a JSON-lines record."""

    scheme: str
    seed: int
    metrics: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    config: dict = field(default_factory=dict)
    error: str | None = None

    def to_record(self):
        rec = {
            "scheme": self.scheme,
            "seed": int(self.seed),
            "d_hat": self.metrics.get("d_hat"),
            "dk_hat": self.metrics.get("dk_hat"),
            "rmae": self.metrics.get("rmae"),
            "log_d_hat": self.metrics.get("log_d_hat"),
            "wall_time_s": round(float(self.wall_time_s), 3),
            "config": self.config,
        }
        if self.error is not None:
            rec["error"] = self.error
        return rec

    def to_json_line(self):
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_json_line(cls, line):
        rec = json.loads(line)
        metrics = {k: rec.get(k) for k in ("d_hat", "dk_hat", "rmae", "log_d_hat")
                   if rec.get(k) is not None}
        return cls(scheme=rec["scheme"], seed=rec["seed"], metrics=metrics,
                   wall_time_s=rec.get("wall_time_s", 0.0),
                   config=rec.get("config", {}), error=rec.get("error"))
