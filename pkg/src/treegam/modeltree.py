"""Model-based trees fitted from binned gram matrices.

A tree splits on one feature (the split variable) and carries a small ridge
regression in every leaf on another feature (the model variable):

    main-effect tree   split_var == model_var, leaf design [1, x]
    interaction tree   split_var != model_var, leaf design = hat-spline basis

Split search never touches raw rows. Rows are grouped by the split variable's
bins and per-bin sufficient statistics are accumulated once:

    a_b = sum_i H_i d_i d_i^T     c_b = sum_i H_i d_i z_i     s_b = sum_i H_i z_i^2

Node statistics are contiguous bin-range sums, so every candidate threshold is
evaluated from prefix sums in O(d^2) and the weighted SSE of a fitted leaf is
available in closed form: SSE = s - 2 b.c + b.A b. The a_b block is the only
part that depends on the design alone (for unit hessians), which is what makes
it worth caching across boosting iterations while c_b and s_b are recomputed
from each iteration's pseudo-response.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import TRAIN
from .errors import NumericalError
from .splines import SplineBasis

LINEAR, SPLINE = "linear", "spline"


@dataclass(frozen=True)
class TreeSpec:
    """Shape of one model tree: which variables it uses and how leaves fit."""

    model_var: int
    split_var: int
    design: str = LINEAR
    basis: SplineBasis = None
    max_depth: int = 2
    min_leaf: int = 20
    ridge: float = 1.0

    def __post_init__(self):
        if self.design not in (LINEAR, SPLINE):
            raise ValueError(f"unknown design {self.design!r}")
        if self.design == SPLINE and self.basis is None:
            raise ValueError("spline design requires a basis")
        if self.model_var == self.split_var and self.design != LINEAR:
            raise ValueError("a main-effect tree uses the raw-linear design")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise ValueError("bad max_depth or min_leaf")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.ridge == 0 and self.design == SPLINE:
            raise NumericalError(
                "ridge=0 with a spline design is singular (the hat columns "
                "sum to one); use a positive ridge"
            )

    @property
    def n_columns(self):
        return 2 if self.design == LINEAR else self.basis.size


def build_design(kind, basis, x):
    """Leaf design rows for raw model-variable values x."""
    x = np.asarray(x, dtype=np.float64)
    if kind == LINEAR:
        return np.column_stack([np.ones_like(x), x])
    return basis.evaluate(x)


def design_matrix(spec, x):
    return build_design(spec.design, spec.basis, x)


def penalty_diagonal(kind, design):
    """Per-column ridge scaling: squared training std of each penalized column.

    Penalizing coefficients against std-scaled columns makes ridge=1 mean the
    same thing regardless of the feature's units. The intercept column of the
    raw-linear design is never penalized; constant columns fall back to a
    unit scale so the system stays non-singular.
    """
    var = design.var(axis=0)
    pen = np.where(var > 0, var, 1.0)
    if kind == LINEAR:
        pen[0] = 0.0
    return pen


@dataclass
class BinnedGram:
    """Per-bin sufficient statistics plus split-variable edge values."""

    a: np.ndarray  # (n_bins, d, d)
    c: np.ndarray  # (n_bins, d)
    s: np.ndarray  # (n_bins,)
    counts: np.ndarray  # (n_bins,) training rows per bin
    edges: np.ndarray  # interior bin edges of the split variable
    penalty: np.ndarray  # (d,) per-column ridge scale


def design_part(design, bins, n_bins, h):
    """The hessian-weighted blocks (a_b, counts) reusable while h is unchanged."""
    d = design.shape[1]
    hd = design * h[:, None]
    a = np.empty((n_bins, d, d))
    for i in range(d):
        for k in range(i, d):
            a[:, i, k] = np.bincount(bins, weights=hd[:, i] * design[:, k], minlength=n_bins)
            if k != i:
                a[:, k, i] = a[:, i, k]
    counts = np.bincount(bins, minlength=n_bins).astype(np.int64)
    return a, counts


def response_part(design, bins, n_bins, z, h):
    """The pseudo-response blocks (c_b, s_b), recomputed every iteration."""
    d = design.shape[1]
    hz = h * z
    c = np.empty((n_bins, d))
    for k in range(d):
        c[:, k] = np.bincount(bins, weights=hz * design[:, k], minlength=n_bins)
    s = np.bincount(bins, weights=hz * z, minlength=n_bins)
    return c, s


def accumulate_gram(data, bins, spec, z, h):
    """Accumulate per-bin statistics over the training split.

    z and h are the pseudo-response and hessian over training rows, in
    training-row order.
    """
    train = data.rows(TRAIN)
    x_model = data.features[train, spec.model_var]
    b = bins.indices[train, spec.split_var]
    n_bins = int(bins.n_bins[spec.split_var])
    design = design_matrix(spec, x_model)
    a, counts = design_part(design, b, n_bins, np.asarray(h, dtype=np.float64))
    c, s = response_part(design, b, n_bins, np.asarray(z, dtype=np.float64),
                         np.asarray(h, dtype=np.float64))
    return BinnedGram(a, c, s, counts, bins.edges[spec.split_var],
                      penalty_diagonal(spec.design, design))


@dataclass
class TreeNode:
    threshold: float = None
    left: "TreeNode" = None
    right: "TreeNode" = None
    coef: np.ndarray = None
    n_rows: int = 0
    sse: float = 0.0  # training weighted SSE of this subtree

    @property
    def is_leaf(self):
        return self.threshold is None


@dataclass
class FittedTree:
    spec: TreeSpec
    root: TreeNode

    @property
    def train_sse(self):
        return self.root.sse

    def predict(self, features):
        return predict_tree(self, features)


def _solve(a, c, ridge_diag):
    """Batched ridge solve of (a + diag) beta = c for stacked systems."""
    try:
        beta = np.linalg.solve(a + np.diag(ridge_diag), c[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "singular leaf system; a collinear design needs ridge > 0"
        ) from exc
    if not np.isfinite(beta).all():
        raise NumericalError("leaf solve produced non-finite coefficients")
    return beta


def _sse(a, c, s, beta):
    quad = np.einsum("...d,...de,...e->...", beta, a, beta)
    return s - 2.0 * np.einsum("...d,...d->...", beta, c) + quad


def fit_tree(gram, spec):
    """Greedy depth-limited fit from binned statistics.

    Candidates are the interior bin boundaries inside a node's bin range;
    a split is kept only when both children hold at least ``min_leaf``
    training rows and the children's summed weighted SSE is strictly below
    the parent's. Ties between equally good thresholds resolve to the
    smaller threshold.
    """
    n_bins = gram.a.shape[0]
    ridge_diag = spec.ridge * gram.penalty
    cum_a = np.concatenate([np.zeros((1,) + gram.a.shape[1:]), np.cumsum(gram.a, axis=0)])
    cum_c = np.concatenate([np.zeros((1, gram.c.shape[1])), np.cumsum(gram.c, axis=0)])
    cum_s = np.concatenate([[0.0], np.cumsum(gram.s)])
    cum_n = np.concatenate([[0], np.cumsum(gram.counts)])

    def build(lo, hi, depth):
        a = cum_a[hi] - cum_a[lo]
        c = cum_c[hi] - cum_c[lo]
        s = cum_s[hi] - cum_s[lo]
        n = int(cum_n[hi] - cum_n[lo])
        beta = _solve(a[None], c[None], ridge_diag)[0]
        sse_here = float(_sse(a, c, s, beta))
        node = TreeNode(coef=beta, n_rows=n, sse=sse_here)
        if depth >= spec.max_depth or hi - lo < 2:
            return node
        cuts = np.arange(lo + 1, hi)
        n_left = cum_n[cuts] - cum_n[lo]
        ok = (n_left >= spec.min_leaf) & (n - n_left >= spec.min_leaf)
        cuts = cuts[ok]
        if cuts.size == 0:
            return node
        a_l = cum_a[cuts] - cum_a[lo]
        c_l = cum_c[cuts] - cum_c[lo]
        s_l = cum_s[cuts] - cum_s[lo]
        beta_l = _solve(a_l, c_l, ridge_diag)
        total = _sse(a_l, c_l, s_l, beta_l)
        a_r = a - a_l
        c_r = c - c_l
        s_r = s - s_l
        beta_r = _solve(a_r, c_r, ridge_diag)
        total = total + _sse(a_r, c_r, s_r, beta_r)
        best = int(np.argmin(total))
        if not total[best] < sse_here:
            return node
        cut = int(cuts[best])
        left = build(lo, cut, depth + 1)
        right = build(cut, hi, depth + 1)
        return TreeNode(
            threshold=float(gram.edges[cut - 1]),
            left=left,
            right=right,
            n_rows=n,
            sse=left.sse + right.sse,
        )

    return FittedTree(spec, build(0, n_bins, 0))


def predict_tree(tree, features):
    """Evaluate the tree on raw feature rows.

    Routing uses raw values against stored thresholds with the same tie rule
    as binning: a value exactly equal to a threshold goes right.
    """
    features = np.asarray(features, dtype=np.float64)
    spec = tree.spec
    design = design_matrix(spec, features[:, spec.model_var])
    x_split = features[:, spec.split_var]
    out = np.empty(features.shape[0], dtype=np.float64)

    def route(node, idx):
        if node.is_leaf:
            out[idx] = design[idx] @ node.coef
            return
        left = x_split[idx] < node.threshold
        route(node.left, idx[left])
        route(node.right, idx[~left])

    route(tree.root, np.arange(features.shape[0]))
    return out
