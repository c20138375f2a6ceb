"""Degree-1 B-spline (hat function) bases on quantile knots.

With knots t_0 < ... < t_{K-1} the basis has exactly K functions: hat k peaks
at t_k and falls linearly to zero at the neighbouring knots. Inputs are
clamped to the knot range before evaluation, so each row activates at most
two basis columns and the columns sum to one everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SplineBasis:
    knots: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=np.float64)
        if t.ndim != 1 or t.size < 3:
            raise DataError("a spline basis needs at least 3 knots")
        if not (np.diff(t) > 0).all():
            raise DataError("knots must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "knots", t)

    @property
    def size(self):
        return self.knots.size

    def evaluate(self, x):
        return evaluate(self, x)


def fit_knots(values, k=5):
    """Place k knots at evenly spaced quantiles of ``values``.

    Levels are linspace(0, 1, k), so the boundary knots sit at the sample
    minimum and maximum. Duplicate quantiles (heavy ties) are collapsed; if
    fewer than 3 distinct knots remain the basis cannot represent a bend and
    a `DataError` is raised so the caller can fall back to a raw-linear
    design.
    """
    if k < 3:
        raise DataError("need at least 3 knots")
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("cannot place knots on an empty sample")
    if np.unique(values).size < 3:
        raise DataError(
            "feature has fewer than 3 distinct values; use a raw-linear design"
        )
    knots = np.unique(np.quantile(values, np.linspace(0.0, 1.0, k)))
    if knots.size < 3:
        raise DataError(
            f"feature has too few distinct values for a spline basis "
            f"({knots.size} distinct knots); use a raw-linear design"
        )
    return SplineBasis(knots)


def evaluate(basis, x):
    """Evaluate all hat functions at x. Returns an array of shape (n, K)."""
    t = basis.knots
    k = t.size
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    v = np.clip(x, t[0], t[-1])
    seg = np.clip(np.searchsorted(t, v, side="right") - 1, 0, k - 2)
    w = (v - t[seg]) / (t[seg + 1] - t[seg])
    out = np.zeros((x.size, k), dtype=np.float64)
    rows = np.arange(x.size)
    out[rows, seg] = 1.0 - w
    out[rows, seg + 1] += w
    return out[0] if scalar else out
