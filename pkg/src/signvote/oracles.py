"""Stochastic gradient sources with known ground truth.

Every objective exposes ``value``, ``gradient`` and ``sample``; the latter
returns a :class:`StochasticGradient` that carries the exact gradient next to
the noisy one so telemetry and theory checks never have to estimate it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CRITICAL_SNR = 2.0 / math.sqrt(3.0)

# Two-point distribution: 50 w.p. 0.1, -1 w.p. 0.9.
BIMODAL_HIGH, BIMODAL_LOW, BIMODAL_P_HIGH = 50.0, -1.0, 0.1
BIMODAL_MEAN = BIMODAL_P_HIGH * BIMODAL_HIGH + (1 - BIMODAL_P_HIGH) * BIMODAL_LOW
BIMODAL_STD = math.sqrt(
    BIMODAL_P_HIGH * BIMODAL_HIGH**2 + (1 - BIMODAL_P_HIGH) * BIMODAL_LOW**2 - BIMODAL_MEAN**2
)

NOISE_KINDS = ("none", "gaussian", "uniform", "bimodal_counterexample")


@dataclass(frozen=True)
class ObjectiveSpec:
    dim: int
    f_star: float
    smoothness: np.ndarray
    noise_sigma: np.ndarray
    f0: float

    @property
    def f_gap(self) -> float:
        return self.f0 - self.f_star

    @property
    def L1(self) -> float:
        return float(np.sum(self.smoothness))


@dataclass
class StochasticGradient:
    values: np.ndarray
    true_gradient: np.ndarray
    round: int = 0
    worker_id: int = 0


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean gradient noise.

    ``sigma`` is the per-coordinate standard deviation (scalar or length-d).
    ``gaussian`` and ``uniform`` are unimodal and symmetric; the bimodal
    counterexample is centred two-point noise and is neither.
    """

    kind: str = "gaussian"
    sigma: float | np.ndarray = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @property
    def unimodal_symmetric(self) -> bool:
        return self.kind in ("gaussian", "uniform")

    def std(self, dim: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(dim)
        if self.kind == "bimodal_counterexample":
            return np.full(dim, BIMODAL_STD)
        return np.broadcast_to(np.asarray(self.sigma, dtype=np.float64), (dim,)).copy()

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(shape)
        if self.kind == "bimodal_counterexample":
            return bimodal_oracle(rng, shape) - BIMODAL_MEAN
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.kind == "gaussian":
            return sigma * rng.standard_normal(shape)
        half_width = math.sqrt(3.0) * sigma
        return half_width * rng.uniform(-1.0, 1.0, shape)


class Objective:
    """Base for objectives with an additive-noise gradient oracle."""

    dim: int
    noise: NoiseModel
    f_star: float = 0.0

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def smoothness(self) -> np.ndarray:
        raise NotImplementedError

    def sigma(self) -> np.ndarray:
        return self.noise.std(self.dim)

    def spec(self, x0) -> ObjectiveSpec:
        return ObjectiveSpec(self.dim, self.f_star, self.smoothness(), self.sigma(), self.value(x0))

    def sample(self, x, rng, batch_size: int = 1) -> StochasticGradient:
        """Mini-batch gradient: the mean of ``batch_size`` independent draws."""
        if batch_size < 1:
            raise ValueError("empty batch")
        g = self.gradient(x)
        if batch_size == 1:
            noise = self.noise.sample(rng, g.shape)
        else:
            noise = self.noise.sample(rng, (batch_size, g.size)).sum(axis=0) / batch_size
        return StochasticGradient(g + noise, g)


class Quadratic(Objective):
    """f(x) = ||x||^2 / 2, so g(x) = x, f* = 0 and every L_i = 1."""

    def __init__(self, dim: int, noise: NoiseModel | None = None):
        self.dim = dim
        self.noise = noise if noise is not None else NoiseModel("gaussian", 1.0)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * float(x @ x)

    def gradient(self, x) -> np.ndarray:
        return np.array(x, dtype=np.float64)

    def smoothness(self) -> np.ndarray:
        return np.ones(self.dim)


class Linear(Objective):
    """f(x) = slope . x with constant gradient; unbounded below (f* = -inf)."""

    f_star = -math.inf

    def __init__(self, slope, noise: NoiseModel | None = None):
        self.slope = np.atleast_1d(np.asarray(slope, dtype=np.float64))
        self.dim = self.slope.size
        self.noise = noise if noise is not None else NoiseModel("none")

    def value(self, x) -> float:
        return float(self.slope @ np.asarray(x, dtype=np.float64))

    def gradient(self, x) -> np.ndarray:
        return self.slope.copy()

    def smoothness(self) -> np.ndarray:
        return np.zeros(self.dim)


def quadratic_oracle(x, noise: NoiseModel, rng: np.random.Generator) -> StochasticGradient:
    x = np.asarray(x, dtype=np.float64)
    return Quadratic(x.size, noise).sample(x, rng)


def bimodal_oracle(rng: np.random.Generator, size=None):
    """Draw the two-point counterexample: 50 w.p. 0.1, else -1 (mean 4.1)."""
    u = rng.random(size)
    return np.where(u < BIMODAL_P_HIGH, BIMODAL_HIGH, BIMODAL_LOW)


def bimodal_counterexample() -> Linear:
    """1-D objective whose oracle returns exactly the bimodal draws above."""
    return Linear([BIMODAL_MEAN], NoiseModel("bimodal_counterexample"))


@dataclass(frozen=True)
class LogisticDataset:
    features: np.ndarray
    labels: np.ndarray  # +1 / -1
    seed: int = 0
    flip_rate: float = 0.0

    @property
    def n_examples(self) -> int:
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def make_logistic_dataset(seed: int, n_examples: int, dim: int, flip_rate: float = 0.1) -> LogisticDataset:
    """Linearly separable data with a fraction ``flip_rate`` of labels flipped."""
    if n_examples < 1 or dim < 1:
        raise ValueError("dataset needs at least one example and one feature")
    if not 0.0 <= flip_rate <= 1.0:
        raise ValueError("flip_rate must lie in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1061]))
    w_true = rng.standard_normal(dim)
    features = rng.standard_normal((n_examples, dim))
    labels = np.where(features @ w_true >= 0, 1.0, -1.0)
    flips = rng.random(n_examples) < flip_rate
    labels[flips] *= -1
    return LogisticDataset(features, labels, seed, flip_rate)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Logistic(Objective):
    """Mean logistic loss over a fixed dataset; batches drawn without replacement."""

    f_star = 0.0

    def __init__(self, dataset: LogisticDataset):
        self.data = dataset
        self.dim = dataset.dim
        self.noise = NoiseModel("none")

    def value(self, x) -> float:
        margins = self.data.labels * (self.data.features @ np.asarray(x, dtype=np.float64))
        return float(np.mean(np.logaddexp(0.0, -margins)))

    def example_gradients(self, x, idx=None) -> np.ndarray:
        X, y = self.data.features, self.data.labels
        if idx is not None:
            X, y = X[idx], y[idx]
        margins = y * (X @ np.asarray(x, dtype=np.float64))
        return -(y * _sigmoid(-margins))[:, None] * X

    def gradient(self, x) -> np.ndarray:
        return self.example_gradients(x).mean(axis=0)

    def smoothness(self) -> np.ndarray:
        return 0.25 * np.mean(self.data.features**2, axis=0)

    def sigma(self) -> np.ndarray:
        # |per-example gradient_i| <= |feature_i|, so this bounds the std at any x.
        return np.sqrt(np.mean(self.data.features**2, axis=0))

    def empirical_sigma(self, x) -> np.ndarray:
        return self.example_gradients(x).std(axis=0)

    def sample(self, x, rng, batch_size: int = 1) -> StochasticGradient:
        return logistic_oracle(self, x, batch_size, rng)


def logistic_oracle(objective: Logistic, x, n: int, rng: np.random.Generator) -> StochasticGradient:
    if n < 1:
        raise ValueError("empty batch")
    total = objective.data.n_examples
    if n > total:
        raise ValueError(f"batch of {n} exceeds dataset size {total}")
    full = objective.example_gradients(x)
    truth = full.mean(axis=0)
    if n == total:
        return StochasticGradient(truth.copy(), truth)
    idx = rng.choice(total, size=n, replace=False)
    return StochasticGradient(full[idx].mean(axis=0), truth)


def snr_profile(g, sigma) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate SNR |g_i|/sigma_i and the indices strictly above 2/sqrt(3).

    A coordinate with sigma_i = 0 and g_i != 0 has infinite SNR; one with
    g_i = sigma_i = 0 has SNR 0.
    """
    g = np.abs(np.asarray(g, dtype=np.float64))
    sigma = np.asarray(sigma, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = g / sigma
    S[np.isnan(S)] = 0.0
    return S, np.flatnonzero(S > CRITICAL_SNR)
