"""Tabular data container, train/validation/test splitting, and quantile binning.

All downstream fitting code reads features through this module: a `Dataset`
holds an immutable n x p float matrix plus a split tag per row, and a `BinMap`
holds per-feature bin edges computed from the training split together with
precomputed bin indices for every row.
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import DataError

TRAIN, VALIDATION, TEST = 0, 1, 2


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix, response vector and per-row split tags.

    Parameters
    ----------
    features : ndarray of shape (n, p)
        Numeric feature matrix, stored column-major internally.
    feature_names : tuple of str
        One name per column.
    response : ndarray of shape (n,)
        Numeric response. For binary losses values must be 0/1.
    split_tag : ndarray of shape (n,) or None
        0 = train, 1 = validation, 2 = test. Defaults to all-train.
    """

    features: np.ndarray
    feature_names: tuple
    response: np.ndarray
    split_tag: np.ndarray = None

    def __post_init__(self):
        x = np.asfortranarray(np.asarray(self.features, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.response, dtype=np.float64))
        if x.ndim != 2:
            raise DataError("features must be a 2-d array")
        if y.shape != (x.shape[0],):
            raise DataError("response length does not match feature rows")
        if len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length does not match feature columns")
        if not np.isfinite(x).all():
            raise DataError("features contain non-finite values")
        if not np.isfinite(y).all():
            raise DataError("response contains non-finite values")
        tag = self.split_tag
        if tag is None:
            tag = np.zeros(x.shape[0], dtype=np.uint8)
        else:
            tag = np.asarray(tag, dtype=np.uint8)
            if tag.shape != (x.shape[0],):
                raise DataError("split_tag length does not match feature rows")
            if tag.max(initial=0) > TEST:
                raise DataError("split_tag values must be 0, 1 or 2")
        for arr in (x, y, tag):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "split_tag", tag)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def rows(self, tag):
        """Row indices carrying the given split tag."""
        return np.flatnonzero(self.split_tag == tag)

    def column(self, j):
        return self.features[:, j]


def load_csv(path, response_column, delimiter=",", has_header=True, binary=False):
    """Read a delimited text file into a `Dataset` (all rows tagged train).

    The first row is treated as a header unless ``has_header`` is False, in
    which case columns are named ``x1..xp`` and ``response_column`` may be a
    0-based index. Decimal separator is '.'. Parse failures and non-finite
    cells raise `DataError` naming the offending row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path}: file is empty")
    if has_header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = [f"x{i + 1}" for i in range(len(rows[0]))]
        body = rows
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate column names in header")
    if isinstance(response_column, int) and not has_header:
        response_column = names[response_column]
    if response_column not in names:
        raise DataError(f"{path}: response column '{response_column}' not found")
    if not body:
        raise DataError(f"{path}: no data rows")

    ncol = len(names)
    values = np.empty((len(body), ncol), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != ncol:
            raise DataError(
                f"{path}: row {i + 1} has {len(row)} fields, expected {ncol}"
            )
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i + 1}, column '{names[j]}': "
                    f"cannot parse {cell!r} as a number"
                ) from None
            if not np.isfinite(v):
                raise DataError(
                    f"{path}: row {i + 1}, column '{names[j]}': non-finite value"
                )
            values[i, j] = v

    r = names.index(response_column)
    y = values[:, r]
    x = np.delete(values, r, axis=1)
    feature_names = tuple(n for n in names if n != response_column)
    if binary:
        bad = ~np.isin(y, (0.0, 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"{path}: row {i + 1}, column '{response_column}': "
                f"binary response must be 0 or 1, got {y[i]!r}"
            )
    return Dataset(x, feature_names, y)


def split(data, fractions, seed):
    """Assign train/validation/test tags by a seeded permutation.

    ``fractions`` is a (train, validation, test) triple summing to 1. Cut
    points are ``floor(n * cumulative_fraction)``; every part must end up
    non-empty.
    """
    f = tuple(float(v) for v in fractions)
    if len(f) != 3 or any(v <= 0 for v in f) or abs(sum(f) - 1.0) > 1e-9:
        raise DataError("fractions must be three positive values summing to 1")
    n = data.n_rows
    cut1 = int(np.floor(n * f[0]))
    cut2 = int(np.floor(n * (f[0] + f[1])))
    if cut1 < 1 or cut2 - cut1 < 1 or n - cut2 < 1:
        raise DataError(f"split of {n} rows by {f} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    tag = np.empty(n, dtype=np.uint8)
    tag[perm[:cut1]] = TRAIN
    tag[perm[cut1:cut2]] = VALIDATION
    tag[perm[cut2:]] = TEST
    return dataclasses.replace(data, split_tag=tag)


@dataclass(frozen=True)
class BinMap:
    """Per-feature bin edges (from the training split) and row bin indices.

    ``edges[j]`` is a strictly increasing array of interior edges for feature
    j; feature values are mapped by `bin_values`, so a value exactly equal to
    an edge lands in the higher bin. ``indices`` covers every row of the
    dataset the map was built from, including validation and test rows, which
    therefore clamp into the end bins.
    """

    edges: tuple
    indices: np.ndarray
    n_bins: np.ndarray

    def __post_init__(self):
        self.indices.setflags(write=False)
        self.n_bins.setflags(write=False)
        for e in self.edges:
            e.setflags(write=False)


def bin_values(edges, values):
    """Map raw values to bin indices: index = number of edges <= value."""
    return np.searchsorted(edges, values, side="right").astype(np.int32)


def _feature_edges(col, max_bins):
    # Edges sit strictly between adjacent distinct values so that the
    # value-equal-to-edge-goes-right rule can never merge two distinct values.
    u = np.unique(col)
    if u.size <= 1:
        return np.empty(0, dtype=np.float64)
    if u.size <= max_bins:
        return (u[:-1] + u[1:]) / 2.0
    qs = np.quantile(col, np.arange(1, max_bins) / max_bins)
    pos = np.searchsorted(u, qs, side="right") - 1
    pos = np.clip(pos, 0, u.size - 2)
    return np.unique((u[pos] + u[pos + 1]) / 2.0)


def make_bins(data, max_bins=256):
    """Build a `BinMap` from training-split quantiles.

    Target edges are quantiles at levels k/max_bins snapped to the midpoint
    of the surrounding pair of distinct training values; when a feature has
    at most ``max_bins`` distinct training values every distinct value gets
    its own bin. A constant feature yields a single bin and is simply
    unsplittable downstream.
    """
    if max_bins < 2:
        raise DataError("max_bins must be at least 2")
    train = data.rows(TRAIN)
    if train.size == 0:
        raise DataError("cannot build bins: training split is empty")
    p = data.n_features
    edges = []
    n_bins = np.empty(p, dtype=np.int32)
    indices = np.empty((data.n_rows, p), dtype=np.int32, order="F")
    for j in range(p):
        e = _feature_edges(data.features[train, j], max_bins)
        edges.append(e)
        n_bins[j] = e.size + 1
        indices[:, j] = bin_values(e, data.features[:, j])
    return BinMap(tuple(edges), indices, n_bins)
