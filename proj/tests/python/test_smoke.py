"""Smoke tests for the python bindings: import, core formulas, a tiny
training run, and file round trips."""

import math

import numpy as np
import pytest

import fleetwise as fw


def test_rainflow_triangle_dem():
    # 50 identical cycles of range 6: dem with n_eq=50 equals the range
    samples = []
    for _ in range(50):
        samples += [-3.0, 3.0]
    samples.append(-3.0)
    spectrum = fw.rainflow_count(samples, dt=1.0, n_bins=64)
    assert spectrum.total_count() == pytest.approx(50.0)
    sn = fw.SnParams(k=1.0, m=3.0, n_eq=50.0)
    assert fw.dem(spectrum, sn) == pytest.approx(6.0, rel=1e-12)
    # miner identity: D = n_eq * dem^m / k
    d = fw.miner_damage(spectrum, sn)
    assert d == pytest.approx(sn.n_eq * 6.0**3 / sn.k, rel=1e-9)


def test_gaussian_kl_values():
    assert fw.gaussian_kl(0.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert fw.gaussian_kl(1.0, 1.0) == pytest.approx(0.5, rel=1e-9)


def test_point_errors():
    e = fw.point_errors([1.0, 5.0], [2.0, 4.0])
    assert e.mae == pytest.approx(1.0)
    assert e.rmse == pytest.approx(1.0)
    assert e.percent_error == pytest.approx(37.5)


def test_decompose_identity_and_ll():
    net = fw.BnnNet.make(2, [8], 1, fw.HeadKind.ALEATORIC, seed=3)
    rows = np.array([[0.1, -0.4], [1.2, 0.3]])
    samples = fw.predictive_ensemble(net, rows, n_f=64, seed=5)
    assert samples.mu.shape == (2, 64, 1)
    d = fw.decompose(samples)
    np.testing.assert_allclose(
        d.aleatory_var + d.epistemic_var, d.total_var, rtol=1e-12
    )
    labels = np.zeros((2, 1))
    ll = fw.expected_log_likelihood(samples, labels)
    assert math.isfinite(ll)


def test_min_euclidean_distance():
    train = np.zeros((1, 2))
    test = np.array([[3.0, 4.0]])
    assert fw.min_euclidean_distance(test, train)[0] == pytest.approx(5.0)


def test_dnn_learns_a_line():
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, 1.0, size=(200, 1))
    y = 2.0 * x
    net = fw.DenseNet.make(1, [8], 1, seed=2)
    trained, history = fw.mlp_train(
        net, x, y, max_epochs=500, learning_rate=5e-3, patience=500, seed=2
    )
    pred = np.array([trained.forward([v]) for v in x[:, 0]])
    assert np.mean(np.abs(pred[:, 0] - y[:, 0])) < 0.05
    assert len(history.training_loss) > 0


def test_bnn_train_and_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    x = rng.uniform(-1.0, 1.0, size=(256, 1))
    y = np.sin(x) + 0.1 * rng.standard_normal(x.shape)
    net = fw.BnnNet.make(1, [8], 1, fw.HeadKind.ALEATORIC, seed=2)
    trained, history, stats = fw.bnn_train(
        net, x, y, max_epochs=60, batch_size=256, learning_rate=1e-3, seed=2
    )
    assert history.training_loss[-1] < history.training_loss[0]
    assert len(stats.cov) == len(history.training_loss)

    path = tmp_path / "model.json"
    trained.save(str(path))
    loaded = fw.BnnNet.load(str(path))
    rows = np.array([[0.2]])
    a = fw.predictive_ensemble(trained, rows, n_f=8, seed=9)
    b = fw.predictive_ensemble(loaded, rows, n_f=8, seed=9)
    np.testing.assert_array_equal(a.mu, b.mu)


def test_synth_farm_and_csv(tmp_path):
    spec = fw.FarmSpec()
    spec.seed = 21
    spec.months = 1
    spec.rows_per_month = 20
    farm = fw.synth_farm(spec)
    assert farm.fleet_leader.rows == 20
    assert "DEM_tn" in farm.fleet_leader.columns
    assert len(fw.input_config_columns(10)) == 13
    assert len(fw.input_config_columns(6)) == 28

    path = tmp_path / "fl.csv"
    fw.save_csv(farm.fleet_leader, str(path))
    loaded, dropped = fw.load_csv(str(path))
    assert dropped == 0
    assert loaded.rows == 20
    np.testing.assert_array_equal(
        loaded.column("DEM_tl"), farm.fleet_leader.column("DEM_tl")
    )


def test_validation_errors_map_to_python():
    with pytest.raises(ValueError):
        fw.rainflow_count([1.0], dt=1.0)  # needs two samples
