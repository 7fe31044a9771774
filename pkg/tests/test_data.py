"""Dataset/trajectory invariants and report serialization."""
import numpy as np
import pytest

from hybridpd.data import Dataset, ExperimentReport, TrajectoryDataset
from hybridpd.errors import ConfigurationError


def test_dataset_basic_properties():
    d = Dataset(np.ones((3, 2)), np.zeros(3), (1,), "train")
    assert d.n == 3 and d.d == 2
    assert d.xk.shape == (3, 1)


def test_dataset_rejects_nan_and_bad_known():
    with pytest.raises(ConfigurationError):
        Dataset(np.array([[np.nan]]), np.array([0.0]), (0,))
    with pytest.raises(ConfigurationError):
        Dataset(np.ones((2, 2)), np.array([0.0, np.inf]), (0,))
    with pytest.raises(ConfigurationError):
        Dataset(np.ones((2, 2)), np.zeros(2), ())
    with pytest.raises(ConfigurationError):
        Dataset(np.ones((2, 2)), np.zeros(2), (5,))
    with pytest.raises(ConfigurationError):
        Dataset(np.zeros((0, 2)), np.zeros(0), (0,))


def test_dataset_arrays_immutable():
    d = Dataset(np.ones((2, 2)), np.zeros(2), (0,))
    with pytest.raises(ValueError):
        d.features[0, 0] = 5.0
    with pytest.raises(ValueError):
        d.targets[0] = 5.0


def test_trajectory_dataset_shapes():
    t = TrajectoryDataset(np.zeros((4, 11, 3)), 0.05)
    assert t.n_traj == 4 and t.horizon == 10 and t.d == 3
    assert t.pooled_states().shape == (44, 3)


def test_trajectory_grid_shape_consistency():
    TrajectoryDataset(np.zeros((2, 5, 2 * 16)), 0.1, grid_shape=(4, 4))
    with pytest.raises(ConfigurationError):
        TrajectoryDataset(np.zeros((2, 5, 33)), 0.1, grid_shape=(4, 4))
    with pytest.raises(ConfigurationError):
        TrajectoryDataset(np.zeros((2, 5, 3)), -0.1)
    with pytest.raises(ConfigurationError):
        TrajectoryDataset(np.zeros((2, 1, 3)), 0.1)  # horizon < 1


def test_trajectory_channels():
    t = TrajectoryDataset(np.zeros((2, 5, 2 * 16)), 0.1, grid_shape=(4, 4))
    assert t.channels == 2


def test_report_roundtrip_lossless():
    rep = ExperimentReport(
        scheme="pd", seed=3,
        metrics={"d_hat": 1.25, "dk_hat": 0.0625, "rmae": 26.5,
                 "log_d_hat": -5.41},
        wall_time_s=12.218, config={"problem": "x", "model": "mlp"})
    line = rep.to_json_line()
    back = ExperimentReport.from_json_line(line)
    assert back.to_json_line() == line
    assert back.metrics == rep.metrics
    assert back.seed == rep.seed


def test_report_field_names_fixed():
    import json
    rec = json.loads(ExperimentReport("seq", 0, {"d_hat": 1.0}).to_json_line())
    for key in ("scheme", "seed", "d_hat", "dk_hat", "rmae", "log_d_hat",
                "wall_time_s"):
        assert key in rec


def test_report_error_field_preserved():
    rep = ExperimentReport("pd", 1, {}, 0.5, {}, error="DivergenceError: boom")
    back = ExperimentReport.from_json_line(rep.to_json_line())
    assert back.error == "DivergenceError: boom"
