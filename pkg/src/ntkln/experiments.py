"""Desk-scale experiment drivers: toy data, training, scans, heatmaps.

Everything here is a pure function of its configuration and seed list, so
repeated runs emit identical numbers.  Seed aggregation iterates seeds in
sorted order to keep outputs byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .arch import ArchSpec, make_arch
from .errors import ConfigError, Diverged
from .kernel import ntk_gram
from .net import (
    FiniteNet,
    empirical_ntk_gram,
    forward_batch,
    init_net,
    loss_grads,
)
from .numerics import RngStream
from .regression import Dataset, NTKRegressor


TOY_TARGETS = {
    "sine": lambda x: np.sin(2.0 * x),
    "linear": lambda x: 0.5 * x,
    "quadratic": lambda x: 0.25 * x ** 2,
}


@dataclass(frozen=True)
class ToyDatasetConfig:
    kind: str
    n_points: int = 100
    input_range: tuple = (-3.0, 3.0)
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TOY_TARGETS:
            raise ConfigError(f"unknown toy dataset {self.kind!r}")
        lo, hi = self.input_range
        if not lo < hi:
            raise ConfigError("input_range must satisfy lo < hi")
        if self.n_points < 2:
            raise ConfigError("need at least two points")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be non-negative")


def make_toy_dataset(cfg: ToyDatasetConfig) -> Dataset:
    """Equally spaced 1-D inputs with sine/linear/quadratic targets."""
    lo, hi = cfg.input_range
    x = np.linspace(lo, hi, cfg.n_points)
    y = TOY_TARGETS[cfg.kind](x)
    if cfg.noise_sd > 0:
        y = y + cfg.noise_sd * RngStream(seed=cfg.seed, stream=777).normal(cfg.n_points)
    return Dataset(X=x.reshape(-1, 1), y=y)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "full_batch_gd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


def train(net: FiniteNet, dataset: Dataset, cfg: TrainConfig):
    """Full-batch training on the MSE loss; returns (net, loss_trace).

    Adam uses the standard moment constants (0.9, 0.999, eps 1e-8).
    Raises Diverged as soon as the loss stops being finite.
    """
    X, y = dataset.X, dataset.y
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_w = [np.zeros_like(w) for w in net.weights]
    v_w = [np.zeros_like(w) for w in net.weights]
    m_b = [np.zeros_like(b) for b in net.biases]
    v_b = [np.zeros_like(b) for b in net.biases]
    trace = []
    for t in range(1, cfg.epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, gw, gb = loss_grads(net, X, y)
        if not math.isfinite(loss):
            raise Diverged(f"training loss became non-finite at epoch {t}")
        trace.append(loss)
        if cfg.optimizer == "full_batch_gd":
            for i in range(len(net.weights)):
                net.weights[i] -= cfg.learning_rate * gw[i]
                net.biases[i] -= cfg.learning_rate * gb[i]
            continue
        for i in range(len(net.weights)):
            m_w[i] = beta1 * m_w[i] + (1 - beta1) * gw[i]
            v_w[i] = beta2 * v_w[i] + (1 - beta2) * gw[i] ** 2
            m_b[i] = beta1 * m_b[i] + (1 - beta1) * gb[i]
            v_b[i] = beta2 * v_b[i] + (1 - beta2) * gb[i] ** 2
            mhat_w = m_w[i] / (1 - beta1 ** t)
            vhat_w = v_w[i] / (1 - beta2 ** t)
            mhat_b = m_b[i] / (1 - beta1 ** t)
            vhat_b = v_b[i] / (1 - beta2 ** t)
            net.weights[i] -= cfg.learning_rate * mhat_w / (np.sqrt(vhat_w) + eps)
            net.biases[i] -= cfg.learning_rate * mhat_b / (np.sqrt(vhat_b) + eps)
    final_loss, _, _ = loss_grads(net, X, y)
    if not math.isfinite(final_loss):
        raise Diverged("training loss became non-finite")
    trace.append(final_loss)
    net.cache = None
    return net, trace


class FiniteNetRegressor(RegressorMixin, BaseEstimator):
    """Finite-width network trained to convergence, as an estimator."""

    def __init__(self, depth: int = 2, width: int = 128, activation: str = "relu",
                 ln=None, sigma_b: float = 0.1, parametrisation: str = "standard",
                 optimizer: str = "adam", learning_rate: float = 1e-3,
                 epochs: int = 3000, seed: int = 0):
        self.depth = depth
        self.width = width
        self.activation = activation
        self.ln = ln
        self.sigma_b = sigma_b
        self.parametrisation = parametrisation
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        arch = make_arch(input_dim=X.shape[1], depth=self.depth,
                         activation=self.activation, ln=self.ln,
                         sigma_b=self.sigma_b, width=self.width)
        net = init_net(arch, self.parametrisation, RngStream(seed=self.seed))
        cfg = TrainConfig(optimizer=self.optimizer,
                          learning_rate=self.learning_rate,
                          epochs=self.epochs, seed=self.seed)
        self.net_, self.loss_trace_ = train(net, Dataset(X=X, y=y), cfg)
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        return forward_batch(self.net_, check_array(X))


def extrapolation_scan(predictor, xs) -> np.ndarray:
    """Predictions of a fitted predictor (or raw net) along the scan."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 1 and xs.shape[1] > 1:
        xs = xs.T
    if isinstance(predictor, FiniteNet):
        return forward_batch(predictor, xs)
    return np.asarray(predictor.predict(xs))


def multi_seed_scan(make_and_fit, xs, seeds):
    """Seed-averaged predictions with 95% normal-approximation CI.

    make_and_fit(seed) must return a fitted predictor.  Returns
    (mean, ci_half_width) arrays over the scan points.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    preds = np.stack([extrapolation_scan(make_and_fit(seed), xs)
                      for seed in sorted(seeds)])
    mean = preds.mean(axis=0)
    n = preds.shape[0]
    sd = preds.std(axis=0, ddof=1) if n > 1 else np.zeros(mean.shape)
    return mean, 1.96 * sd / math.sqrt(n)


# Layer-Norm placement variants used throughout the figure reproductions,
# for depth-2 networks: standard (none), preceding the first hidden layer,
# preceding the second, preceding every hidden layer.
FIG_VARIANTS = {
    "standard": None,
    "ln_first": "first",
    "ln_second": "last",
    "ln_every": "every",
}


def fig1_experiment(dataset_kind: str, seeds=range(5), width: int = 128,
                    scan_lo: float = -15.0, scan_hi: float = 15.0,
                    n_scan: int = 61, epochs: int = 3000,
                    learning_rate: float = 1e-3, sigma_b: float = 0.1):
    """Train every LN variant on one toy dataset and scan the predictions.

    Returns (xs, dataset, {variant: (mean, ci_half_width)}).
    """
    ds = make_toy_dataset(ToyDatasetConfig(kind=dataset_kind))
    xs = np.linspace(scan_lo, scan_hi, n_scan).reshape(-1, 1)
    results = {}
    for name, ln in FIG_VARIANTS.items():
        def make_and_fit(seed, ln=ln):
            model = FiniteNetRegressor(depth=2, width=width, activation="relu",
                                       ln=ln, sigma_b=sigma_b,
                                       parametrisation="standard",
                                       optimizer="adam",
                                       learning_rate=learning_rate,
                                       epochs=epochs, seed=seed)
            return model.fit(ds.X, ds.y)

        results[name] = multi_seed_scan(make_and_fit, xs, seeds)
    return xs.ravel(), ds, results


def heatmap_experiment(arch: ArchSpec, grid, seeds, parametrisation: str = "ntk"):
    """Seed-averaged empirical NTK over a 1-D grid plus the analytic overlay.

    Defaults to the ntk parametrisation so the empirical values are directly
    comparable to the analytic companion grid; the qualitative structure
    (saturating chessboard with LN, norm growth without) is the same in the
    standard parametrisation.

    Returns (grid, mean, std, analytic) with mean/std/analytic of shape
    (len(grid), len(grid)).
    """
    if arch.input_dim != 1:
        raise ConfigError("heatmap experiment uses 1-D inputs")
    grid = np.asarray(grid, dtype=float)
    xs = grid.reshape(-1, 1)
    grams = []
    for seed in sorted(seeds):
        net = init_net(arch, parametrisation, RngStream(seed=seed))
        grams.append(empirical_ntk_gram(net, xs))
    grams = np.stack(grams)
    mean = 0.5 * (grams.mean(axis=0) + grams.mean(axis=0).T)
    std = grams.std(axis=0, ddof=1) if len(grams) > 1 else np.zeros_like(mean)
    analytic = ntk_gram(arch, xs)
    return grid, mean, std, analytic


def make_witness_dataset(n_points: int = 8, input_dim: int = 3,
                         seed: int = 0) -> Dataset:
    """Finite dataset realising the explosion construction.

    Inputs live in a cone of half-angle 30 degrees around e_1 (so every
    pairwise cosine similarity is >= 0.5 > 0) with norms in [1, 2];
    targets alternate +/-1, hence are nontrivial.
    """
    if input_dim < 2:
        raise ConfigError("witness dataset needs input_dim >= 2")
    rng = np.random.default_rng(seed)
    u = np.zeros(input_dim)
    u[0] = 1.0
    X = np.empty((n_points, input_dim))
    for i in range(n_points):
        v = rng.normal(size=input_dim)
        v[0] = 0.0
        v /= np.linalg.norm(v)
        theta = rng.uniform(0.0, math.pi / 6.0)
        r = rng.uniform(1.0, 2.0)
        X[i] = r * (math.cos(theta) * u + math.sin(theta) * v)
    y = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n_points)])
    cosines = (X @ X.T) / np.outer(np.linalg.norm(X, axis=1),
                                   np.linalg.norm(X, axis=1))
    assert np.all(cosines >= 0.5 - 1e-12)
    return Dataset(X=X, y=y)


def explosion_experiment(arch: ArchSpec, dataset: Dataset | None = None,
                         lambdas=(1.0, 10.0, 100.0, 1e3, 1e4)):
    """Fit the GP on the witness data and scan along training directions.

    Reports max |posterior mean| per lambda and the log-log growth slope
    over the last two decades (expected ~ n^L; 1 for relu).
    """
    if dataset is None:
        dataset = make_witness_dataset(input_dim=arch.input_dim)
    model = NTKRegressor(depth=arch.depth, activation=arch.activation,
                         ln=arch.ln_positions, sigma_b=arch.sigma_b)
    model.fit(dataset.X, dataset.y)
    lambdas = sorted(float(l) for l in lambdas)
    max_means = []
    for lam in lambdas:
        preds = model.predict(lam * dataset.X)
        max_means.append(float(np.max(np.abs(preds))))
    log_lam = np.log10(lambdas)
    decade = [i for i, l in enumerate(log_lam) if l >= log_lam[-1] - 2.0 - 1e-12]
    slope = np.polyfit(log_lam[decade],
                       np.log10(np.maximum(max_means, 1e-300))[decade], 1)[0] \
        if len(decade) >= 2 else float("nan")
    return {
        "lambdas": lambdas,
        "max_abs_mean": max_means,
        "loglog_slope_last_two_decades": float(slope),
        "model": model,
    }
