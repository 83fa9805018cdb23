"""Tests for toy datasets, training, and the experiment drivers."""

import math

import numpy as np
import pytest

from ntkln.arch import make_arch
from ntkln.errors import ConfigError, Diverged
from ntkln.experiments import (
    FiniteNetRegressor,
    ToyDatasetConfig,
    TrainConfig,
    explosion_experiment,
    extrapolation_scan,
    fig1_experiment,
    heatmap_experiment,
    make_toy_dataset,
    make_witness_dataset,
    multi_seed_scan,
    train,
)
from ntkln.net import forward_batch, init_net
from ntkln.numerics import RngStream
from ntkln.regression import NTKRegressor


class TestToyDatasets:
    def test_linear_slope(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear", n_points=7,
                                               input_range=(0.0, 4.0)))
        idx = np.argmin(np.abs(ds.X.ravel() - 2.0))
        assert ds.y[idx] == pytest.approx(1.0)

    def test_sine_at_zero(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="sine", n_points=101))
        idx = np.argmin(np.abs(ds.X.ravel()))
        assert ds.y[idx] == pytest.approx(0.0, abs=1e-12)

    def test_spacing(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="quadratic", n_points=100))
        gaps = np.diff(ds.X.ravel())
        np.testing.assert_allclose(gaps, 6.0 / 99.0)

    def test_noise_is_seeded(self):
        a = make_toy_dataset(ToyDatasetConfig(kind="sine", noise_sd=0.1, seed=4))
        b = make_toy_dataset(ToyDatasetConfig(kind="sine", noise_sd=0.1, seed=4))
        np.testing.assert_array_equal(a.y, b.y)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ToyDatasetConfig(kind="cubic")


class TestTraining:
    def test_zero_targets_converge(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear", n_points=20))
        from ntkln.regression import Dataset
        ds0 = Dataset(X=ds.X, y=np.zeros(len(ds)))
        arch = make_arch(input_dim=1, depth=2, width=32, sigma_b=0.1)
        net = init_net(arch, "standard", RngStream(seed=0))
        net, trace = train(net, ds0, TrainConfig(epochs=2000))
        preds = forward_batch(net, ds0.X)
        assert np.max(np.abs(preds)) < 1e-3

    def test_convergence_contract_linear(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear"))
        arch = make_arch(input_dim=1, depth=2, width=64, sigma_b=0.1)
        net = init_net(arch, "standard", RngStream(seed=1))
        net, trace = train(net, ds, TrainConfig(epochs=1500))
        assert trace[-1] < 1e-3 * np.var(ds.y)
        assert trace[-1] < trace[0]
        preds = forward_batch(net, ds.X)
        ss_res = np.sum((preds - ds.y) ** 2)
        ss_tot = np.sum((ds.y - np.mean(ds.y)) ** 2)
        assert 1 - ss_res / ss_tot > 0.999

    def test_divergence_raises(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="sine"))
        arch = make_arch(input_dim=1, depth=2, width=64, sigma_b=0.1)
        net = init_net(arch, "standard", RngStream(seed=2))
        with pytest.raises(Diverged):
            train(net, ds, TrainConfig(optimizer="full_batch_gd",
                                       learning_rate=10.0, epochs=300))

    def test_gd_path_updates(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear", n_points=10))
        arch = make_arch(input_dim=1, depth=1, width=8, sigma_b=0.1)
        net = init_net(arch, "standard", RngStream(seed=3))
        w0 = net.weights[0].copy()
        net, trace = train(net, ds, TrainConfig(optimizer="full_batch_gd",
                                                learning_rate=1e-3, epochs=50))
        assert not np.allclose(net.weights[0], w0)
        assert trace[-1] < trace[0]


class TestEstimator:
    def test_fit_predict_roundtrip(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear", n_points=30))
        model = FiniteNetRegressor(depth=2, width=32, epochs=800, seed=0)
        model.fit(ds.X, ds.y)
        preds = model.predict(ds.X)
        assert np.mean((preds - ds.y) ** 2) < 1e-2

    def test_get_params(self):
        model = FiniteNetRegressor(width=64, ln="first")
        clone = FiniteNetRegressor(**model.get_params())
        assert clone.get_params() == model.get_params()


class TestScans:
    def test_extrapolation_scan_with_gp(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear", n_points=12))
        model = NTKRegressor(depth=2, ln="first").fit(ds.X, ds.y)
        xs = np.linspace(-2, 2, 5)
        preds = extrapolation_scan(model, xs)
        assert preds.shape == (5,)

    def test_multi_seed_ci_shrinks_with_agreement(self):
        # Identical seeds give zero CI width.
        ds = make_toy_dataset(ToyDatasetConfig(kind="linear", n_points=10))
        model = NTKRegressor(depth=2, ln="first").fit(ds.X, ds.y)
        mean, ci = multi_seed_scan(lambda seed: model, np.linspace(-1, 1, 4),
                                   seeds=[0, 1, 2])
        np.testing.assert_allclose(ci, 0.0, atol=1e-12)

    def test_scan_determinism(self):
        ds = make_toy_dataset(ToyDatasetConfig(kind="sine", n_points=15))

        def make_and_fit(seed):
            return FiniteNetRegressor(depth=1, width=16, epochs=100,
                                      seed=seed).fit(ds.X, ds.y)

        xs = np.linspace(-4, 4, 6)
        m1, c1 = multi_seed_scan(make_and_fit, xs, [0, 1])
        m2, c2 = multi_seed_scan(make_and_fit, xs, [1, 0])
        np.testing.assert_array_equal(m1, m2)
        np.testing.assert_array_equal(c1, c2)


class TestHeatmap:
    def test_shapes_and_symmetry(self):
        arch = make_arch(input_dim=1, depth=2, width=64, activation="relu",
                         ln="first", sigma_b=0.1)
        grid, mean, std, analytic = heatmap_experiment(
            arch, np.linspace(-5, 5, 6), seeds=[0, 1])
        assert mean.shape == (6, 6)
        np.testing.assert_allclose(mean, mean.T)
        np.testing.assert_allclose(analytic, analytic.T)

    def test_standard_arch_corner_is_max(self):
        # Homogeneity makes the kernel maximal at maximal norms; at finite
        # width the two mirror corners tie in law, so the analytic grid is
        # the oracle and the empirical max must sit in a corner.
        arch = make_arch(input_dim=1, depth=2, width=128, activation="relu",
                         sigma_b=0.1)
        grid, mean, _, analytic = heatmap_experiment(
            arch, np.linspace(-25, 25, 11), seeds=[0, 1, 2])
        assert analytic[-1, -1] >= np.max(analytic) * (1 - 1e-12)
        corner_max = max(mean[0, 0], mean[-1, -1])
        assert corner_max == pytest.approx(np.max(mean), rel=1e-12)

    def test_rejects_multidim(self):
        arch = make_arch(input_dim=2, depth=1)
        with pytest.raises(ConfigError):
            heatmap_experiment(arch, [0.0, 1.0], seeds=[0])


class TestWitnessAndExplosion:
    def test_witness_cone_property(self):
        ds = make_witness_dataset(n_points=10, input_dim=4, seed=3)
        norms = np.linalg.norm(ds.X, axis=1)
        cos = (ds.X @ ds.X.T) / np.outer(norms, norms)
        assert np.min(cos) >= 0.5 - 1e-12
        assert set(np.unique(ds.y)) == {-1.0, 1.0}

    def test_explosion_slope_near_one(self):
        arch = make_arch(input_dim=3, depth=2, activation="relu", sigma_b=0.1)
        rep = explosion_experiment(arch)
        assert 0.9 <= rep["loglog_slope_last_two_decades"] <= 1.1
        assert rep["max_abs_mean"][-1] > 1e3
        # Growth is monotone in lambda beyond the data radius.
        beyond = rep["max_abs_mean"][1:]
        assert all(a < b for a, b in zip(beyond, beyond[1:]))

    def test_explosion_zero_targets(self):
        from ntkln.regression import Dataset
        ds = make_witness_dataset(n_points=6, input_dim=3, seed=1)
        ds0 = Dataset(X=ds.X, y=np.zeros(len(ds)))
        arch = make_arch(input_dim=3, depth=2, activation="relu", sigma_b=0.1)
        rep = explosion_experiment(arch, dataset=ds0)
        assert max(rep["max_abs_mean"]) == pytest.approx(0.0, abs=1e-9)

    def test_ln_variant_respects_bound(self):
        ds = make_witness_dataset(n_points=6, input_dim=3, seed=2)
        model = NTKRegressor(depth=2, activation="relu", ln="first").fit(ds.X, ds.y)
        bound = model.bound_rkhs()
        for lam in (1.0, 10.0, 100.0, 1e3, 1e4):
            preds = model.predict(lam * ds.X)
            assert np.max(np.abs(preds)) <= bound + 1e-9
