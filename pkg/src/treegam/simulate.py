"""Synthetic data generator for the interaction-recovery experiments.

Thirty features in two equi-correlated Gaussian blocks: x1..x20 share one
latent factor, x21..x30 share another, both with pairwise correlation rho.
Draws are truncated to [-2.5, 2.5] before the signal g(x) is computed, so the
truth itself lives on the truncated features. Four truth models share the
same main effects

    sum_{j=1..5} x_j + sum_{j=6..8} 0.5 x_j^2 + sum_{j=9,10} x_j 1(x_j > 0)

and differ in their interaction structure. Continuous responses add
N(0, 0.5^2) noise; binary responses are Bernoulli(sigmoid(beta0 + g)) with
beta0 calibrated by bisection so the empirical event rate is one half.

All randomness comes from one numpy PCG64 generator seeded by the config, in
a fixed draw order: block-1 factor, block-1 idiosyncratic, block-2 factor,
block-2 idiosyncratic, then response noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DataError
from .losses import sigmoid

N_FEATURES = 30
MAIN_FEATURES = tuple(range(10))
_SHARED_MAIN_COUNT = 10


def clip(x, lower, upper):
    """Elementwise clamp of x to [lower, upper]."""
    if lower > upper:
        raise DataError(f"clip bounds are inverted: {lower} > {upper}")
    return np.minimum(np.maximum(x, lower), upper)


def _shared_mains(x):
    return (
        x[:, 0:5].sum(axis=1)
        + 0.5 * (x[:, 5:8] ** 2).sum(axis=1)
        + x[:, 8] * (x[:, 8] > 0)
        + x[:, 9] * (x[:, 9] > 0)
    )


def _g_model1(x):
    # 0.2 * sum_{j<k<=10} x_j x_k via the square-of-sums identity
    s = x[:, :10].sum(axis=1)
    sq = (x[:, :10] ** 2).sum(axis=1)
    return _shared_mains(x) + 0.2 * 0.5 * (s * s - sq)


def _g_model2(x):
    return (
        _shared_mains(x)
        + 0.25 * x[:, 0] * x[:, 1]
        + 0.25 * x[:, 0] * x[:, 2] ** 2
        + 0.25 * x[:, 3] ** 2 * x[:, 4] ** 2
        + np.exp(x[:, 3] * x[:, 5] / 3.0)
        + x[:, 4] * x[:, 5] * (x[:, 4] > 0) * (x[:, 5] > 0)
        + clip(x[:, 6] + x[:, 7], -1.0, 0.0)
        + clip(x[:, 6] * x[:, 8], -1.0, 1.0)
        + 1.0 * (x[:, 7] > 0) * (x[:, 8] > 0)
    )


def _g_model3(x):
    return (
        _shared_mains(x)
        + 0.25 * x[:, 0] ** 2 * x[:, 1] ** 2
        + 2.0 * np.maximum(x[:, 2] - 0.5, 0.0) * np.maximum(x[:, 3] - 0.5, 0.0)
        + 0.5 * np.sin(np.pi * x[:, 4]) * np.sin(np.pi * x[:, 5])
        + 0.5 * np.sin(np.pi * (x[:, 6] + x[:, 7]))
    )


def _g_model4(x):
    return (
        _shared_mains(x)
        + x[:, 0] * x[:, 1] + x[:, 0] * x[:, 2] + x[:, 1] * x[:, 2]
        + 0.5 * x[:, 0] * x[:, 1] * x[:, 2]
        + x[:, 3] * x[:, 4] + x[:, 3] * x[:, 5] + x[:, 4] * x[:, 5]
        + 0.5 * (x[:, 3] > 0) * x[:, 4] * x[:, 5]
    )


_MODELS = {
    1: (_g_model1, tuple((j, k) for j in range(10) for k in range(j + 1, 10))),
    2: (_g_model2, ((0, 1), (0, 2), (3, 4), (3, 5), (4, 5), (6, 7), (6, 8), (7, 8))),
    3: (_g_model3, ((0, 1), (2, 3), (4, 5), (6, 7))),
    4: (_g_model4, ((0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5))),
}


@dataclass(frozen=True)
class TruthOracle:
    """The generating signal and which terms are genuinely present."""

    model_id: int
    main_features: tuple  # 0-based feature indices with main effects
    pairs: tuple  # 0-based unordered true interaction pairs

    def g(self, x):
        x = np.asarray(x, dtype=np.float64)
        return _MODELS[self.model_id][0](x)


@dataclass(frozen=True)
class SimConfig:
    model_id: int
    n: int
    rho: float = 0.0
    response: str = "continuous"  # or "binary"
    seed: int = 0
    noise_sd: float = 0.5
    truncation: float = 2.5

    def __post_init__(self):
        if self.model_id not in _MODELS:
            raise DataError(f"model_id must be one of {sorted(_MODELS)}")
        if self.n < 1:
            raise DataError("n must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise DataError("rho must be in [0, 1)")
        if self.response not in ("continuous", "binary"):
            raise DataError("response must be 'continuous' or 'binary'")


def equicorrelated_block(rng, n, width, rho):
    """n draws of `width` standard normals with common correlation rho."""
    factor = rng.standard_normal(n)
    own = rng.standard_normal((n, width))
    return np.sqrt(rho) * factor[:, None] + np.sqrt(1.0 - rho) * own


def draw_features(rng, n, rho):
    """Both feature blocks, untruncated."""
    first = equicorrelated_block(rng, n, 20, rho)
    second = equicorrelated_block(rng, n, 10, rho)
    return np.hstack([first, second])


def balance_offset(g, tol=1e-4):
    """beta0 with mean(sigmoid(beta0 + g)) = 1/2, found by bisection."""
    lo, hi = -30.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rate = float(np.mean(sigmoid(mid + g)))
        if abs(rate - 0.5) <= tol:
            return mid
        if rate < 0.5:
            lo = mid
        else:
            hi = mid
    raise DataError("balance offset bisection failed to converge")


def generate(config):
    """Draw one dataset (all rows tagged train) plus its truth oracle."""
    rng = np.random.default_rng(config.seed)
    x = draw_features(rng, config.n, config.rho)
    x = clip(x, -config.truncation, config.truncation)
    oracle = TruthOracle(config.model_id, MAIN_FEATURES, _MODELS[config.model_id][1])
    g = oracle.g(x)
    if config.response == "continuous":
        y = g + rng.normal(0.0, config.noise_sd, config.n)
    else:
        beta0 = balance_offset(g)
        y = rng.binomial(1, sigmoid(beta0 + g)).astype(np.float64)
    names = tuple(f"x{j + 1}" for j in range(N_FEATURES))
    return Dataset(x, names, y), oracle
