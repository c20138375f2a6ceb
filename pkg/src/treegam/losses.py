"""Loss functions and their Newton quantities.

Each boosting iteration works with the first and second derivatives of the
loss with respect to the current score g, evaluated per row:

    squared  l = 0.5 * (y - g)^2      G = g - y          H = 1
    logloss  l = log(1 + e^g) - y*g   G = sigmoid(g) - y H = p * (1 - p)

and the pseudo-response z = -G / H, so that a weighted least-squares fit of z
with weights H is one Newton step. For logloss the hessian is floored to keep
z finite when predictions saturate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

LOSS_KINDS = ("squared", "logloss")


@dataclass(frozen=True)
class LossSpec:
    kind: str = "squared"
    hessian_floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise DataError(f"unknown loss kind {self.kind!r}")
        if not self.hessian_floor > 0:
            raise DataError("hessian_floor must be positive")


@dataclass(frozen=True)
class NewtonState:
    """Per-row derivatives of the loss at the current score."""

    g: np.ndarray  # first derivative
    h: np.ndarray  # second derivative (floored)
    z: np.ndarray  # pseudo-response -g / h


def sigmoid(g):
    out = np.empty_like(g, dtype=np.float64)
    pos = g >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-g[pos]))
    e = np.exp(g[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def derivatives(loss, y, g):
    """Newton quantities of the loss at score g. Returns a `NewtonState`."""
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if loss.kind == "squared":
        grad = g - y
        hess = np.ones_like(g)
        z = y - g
    else:
        p = sigmoid(g)
        grad = p - y
        hess = np.maximum(p * (1.0 - p), loss.hessian_floor)
        z = (y - p) / hess
    return NewtonState(grad, hess, z)


def mean_loss(loss, y, g):
    """Mean loss over rows; the quantity tracked on the validation split."""
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if y.size == 0:
        raise DataError("mean_loss of an empty vector")
    if loss.kind == "squared":
        return float(np.mean(0.5 * (y - g) ** 2))
    return float(np.mean(np.logaddexp(0.0, g) - y * g))


def initial_score(loss, y):
    """Constant score minimizing the loss: mean for squared, logit for logloss."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise DataError("initial_score of an empty vector")
    if loss.kind == "squared":
        return float(np.mean(y))
    m = float(np.mean(y))
    if not 0.0 < m < 1.0:
        raise DataError("binary response is single-class; log-odds undefined")
    return float(np.log(m / (1.0 - m)))
