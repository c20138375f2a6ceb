"""Post-hoc purification of a fitted model into orthogonal named effects.

A fitted model's interaction trees usually leak additive structure: part of a
pair's surface is a function of one variable alone. Purification removes that
leakage without changing predictions. Per interaction pair (j, k):

    1. evaluate the pair's combined tree surface on the training rows,
    2. fit  mu + h_j(x_j) + h_k(x_k)  to it by least squares on hat-spline
       designs of the two variables (minimum-norm solve, so the residual is
       exactly orthogonal to the fitted column span),
    3. subtract the fit from the interaction and add h_j, h_k to the main
       effects and mu to the intercept.

Afterwards every main effect is centered to zero mean over the training rows
(means absorbed into the intercept). The resulting `EffectStore` holds main
effects as tabulated piecewise-linear curves (with doubled breakpoints at
split thresholds, where tree predictions may jump) and interactions as the
pair's trees minus their fitted one-dimensional corrections. The store
reproduces the raw model's predictions exactly and is idempotent under
further purification passes.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import TRAIN
from .errors import DataError
from .modeltree import predict_tree
from .splines import SplineBasis, fit_knots

LINEAR_COMPONENT, SPLINE_COMPONENT = "linear", "spline"


@dataclass(frozen=True)
class ComponentFunction:
    """One fitted one-dimensional correction h(x), centered over training rows."""

    var: int
    kind: str
    basis: SplineBasis  # None for the raw-linear fallback
    coef: np.ndarray
    offset: float

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == LINEAR_COMPONENT:
            return self.coef[0] * x - self.offset
        return self.basis.evaluate(x) @ self.coef - self.offset

    @property
    def outside_slope(self):
        """Slope beyond the data range: splines clamp, the linear fallback doesn't."""
        return float(self.coef[0]) if self.kind == LINEAR_COMPONENT else 0.0

    @property
    def breakpoints(self):
        if self.kind == LINEAR_COMPONENT:
            return np.empty(0)
        return self.basis.knots


@dataclass
class PiecewiseLinear:
    """Tabulated piecewise-linear curve, possibly with jumps.

    Breakpoints are sorted; a value appearing twice marks a jump and queries
    exactly at it take the right-hand value, matching the tree tie rule.
    Beyond the first/last breakpoint the curve extrapolates linearly.
    """

    x: np.ndarray
    y: np.ndarray
    slope_lo: float
    slope_hi: float

    def evaluate(self, v):
        v = np.asarray(v, dtype=np.float64)
        x, y = self.x, self.y
        if x.size == 1:
            return y[0] + (v - x[0]) * self.slope_hi
        idx = np.searchsorted(x, v, side="right") - 1
        idx_c = np.clip(idx, 0, x.size - 2)
        x0, x1 = x[idx_c], x[idx_c + 1]
        y0, y1 = y[idx_c], y[idx_c + 1]
        dx = x1 - x0
        w = np.where(dx > 0, (v - x0) / np.where(dx > 0, dx, 1.0), 0.0)
        out = y0 + w * (y1 - y0)
        out = np.where(v < x[0], y[0] + (v - x[0]) * self.slope_lo, out)
        out = np.where(v > x[-1], y[-1] + (v - x[-1]) * self.slope_hi, out)
        return out

    def shifted(self, c):
        return PiecewiseLinear(self.x, self.y - c, self.slope_lo, self.slope_hi)


@dataclass
class InteractionEffect:
    """A pair's trees minus its fitted one-dimensional corrections."""

    pair: tuple
    scaled_trees: list  # (scale, FittedTree) for every tree of this pair
    components: list  # ComponentFunction corrections, any variable of the pair
    mu: float

    def tree_surface(self, features):
        out = np.zeros(np.asarray(features).shape[0])
        for scale, tree in self.scaled_trees:
            out += scale * predict_tree(tree, features)
        return out

    def evaluate(self, features):
        out = self.tree_surface(features)
        for comp in self.components:
            out -= comp.evaluate(np.asarray(features)[:, comp.var])
        return out - self.mu


@dataclass
class EffectStore:
    """Additive decomposition of a model: intercept + mains + interactions."""

    intercept: float
    mains: dict  # feature index -> PiecewiseLinear
    interactions: dict  # (j, k) with j < k -> InteractionEffect
    importance: list = field(default_factory=list)

    def predict(self, features):
        features = np.asarray(features, dtype=np.float64)
        out = np.full(features.shape[0], self.intercept)
        for j, pl in self.mains.items():
            out += pl.evaluate(features[:, j])
        for eff in self.interactions.values():
            out += eff.evaluate(features)
        return out


def _eval_main_trees(scaled_trees, v, tie_left=False):
    """Sum of main-effect trees at points v, optionally taking left limits."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape)

    def rec(node, idx, acc):
        if node.is_leaf:
            acc[idx] += scale * (node.coef[0] + node.coef[1] * v[idx])
            return
        left = v[idx] <= node.threshold if tie_left else v[idx] < node.threshold
        rec(node.left, idx[left], acc)
        rec(node.right, idx[~left], acc)

    for scale, tree in scaled_trees:
        rec(tree.root, np.arange(v.size), out)
    return out


def tabulate_main(scaled_trees, components, x_min, x_max):
    """Exact piecewise-linear tabulation of tree sums plus corrections."""
    thresholds = set()
    for _, tree in scaled_trees:
        stack = [tree.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                thresholds.add(node.threshold)
                stack.extend([node.left, node.right])
    singles = {float(x_min), float(x_max)}
    for comp in components:
        singles.update(float(t) for t in comp.breakpoints)
    singles -= thresholds
    pts = sorted(
        [(t, "left") for t in thresholds]
        + [(t, "right") for t in thresholds]
        + [(v, "right") for v in singles]
    )
    xs = np.array([p[0] for p in pts])

    def full_eval(v, tie_left=False):
        out = _eval_main_trees(scaled_trees, v, tie_left)
        for comp in components:
            out += comp.evaluate(v)
        return out

    left_mask = np.array([p[1] == "left" for p in pts])
    ys = np.where(left_mask, full_eval(xs, tie_left=True), full_eval(xs))
    lo = float(full_eval(np.array([x_min]))[0] - full_eval(np.array([x_min - 1.0]))[0])
    hi = float(full_eval(np.array([x_max + 1.0]))[0] - full_eval(np.array([x_max]))[0])
    return PiecewiseLinear(xs, ys, lo, hi)


def merge_components(pl, components):
    """Fold additional continuous corrections into an existing tabulation."""
    if not components:
        return pl
    inner = set()
    for comp in components:
        inner.update(float(t) for t in comp.breakpoints)
    inner -= set(pl.x.tolist())
    inner = np.array(sorted(v for v in inner if pl.x[0] < v < pl.x[-1]))

    def add_at(v):
        out = np.zeros(v.shape)
        for comp in components:
            out += comp.evaluate(v)
        return out

    xs = np.concatenate([pl.x, inner])
    ys = np.concatenate([pl.y + add_at(pl.x), pl.evaluate(inner) + add_at(inner)])
    order = np.argsort(xs, kind="stable")  # stable keeps doubled thresholds paired
    slope_extra = sum(comp.outside_slope for comp in components)
    return PiecewiseLinear(xs[order], ys[order],
                           pl.slope_lo + slope_extra, pl.slope_hi + slope_extra)


def build_store(model, features_train):
    """Raw, unpurified decomposition: effects are plain tree sums."""
    features_train = np.asarray(features_train, dtype=np.float64)
    main_trees = defaultdict(list)
    pair_trees = defaultdict(list)
    for tagged in model.trees:
        if tagged.stage == "main":
            main_trees[tagged.term[0]].append((tagged.scale, tagged.tree))
        else:
            pair_trees[tagged.pair].append((tagged.scale, tagged.tree))
    mains = {}
    for j in sorted(main_trees):
        col = features_train[:, j]
        mains[j] = tabulate_main(main_trees[j], [], col.min(), col.max())
    interactions = {
        pair: InteractionEffect(pair, pair_trees[pair], [], 0.0)
        for pair in sorted(pair_trees)
    }
    return EffectStore(float(model.intercept), mains, interactions)


def _component_block(x, knots):
    try:
        basis = fit_knots(x, knots)
        return SPLINE_COMPONENT, basis, basis.evaluate(x)
    except DataError:
        return LINEAR_COMPONENT, None, x[:, None]


def refine(store, features_train, knots=5):
    """One purification pass over every interaction in the store.

    Applying it to an already purified store is a near no-op: the new
    corrections it finds are at solver precision.
    """
    features_train = np.asarray(features_train, dtype=np.float64)
    n = features_train.shape[0]
    if n == 0:
        raise DataError("purification needs training rows")
    new_comps = defaultdict(list)
    interactions = {}
    mu_total = 0.0
    for pair in sorted(store.interactions):
        eff = store.interactions[pair]
        target = eff.evaluate(features_train)
        blocks, metas = [np.ones((n, 1))], []
        for var in pair:
            kind, basis, block = _component_block(features_train[:, var], knots)
            metas.append((var, kind, basis, block.shape[1]))
            blocks.append(block)
        design = np.hstack(blocks)
        beta = np.linalg.lstsq(design, target, rcond=None)[0]
        mu = float(beta[0])
        comps = []
        col = 1
        for var, kind, basis, width in metas:
            coef = beta[col:col + width].copy()
            col += width
            raw = blocks[len(comps) + 1] @ coef
            offset = float(raw.mean())
            comp = ComponentFunction(var, kind, basis, coef, offset)
            comps.append(comp)
            new_comps[var].append(comp)
            mu += offset
        interactions[pair] = InteractionEffect(
            pair, eff.scaled_trees, eff.components + comps, eff.mu + mu)
        mu_total += mu

    intercept = store.intercept + mu_total
    mains = {}
    for j in sorted(set(store.mains) | set(new_comps)):
        if j in store.mains:
            pl = merge_components(store.mains[j], new_comps.get(j, []))
        else:
            col = features_train[:, j]
            pl = tabulate_main([], new_comps[j], col.min(), col.max())
        center = float(pl.evaluate(features_train[:, j]).mean())
        mains[j] = pl.shifted(center)
        intercept += center
    out = EffectStore(intercept, mains, interactions)
    out.importance = term_importance(out, features_train)
    return out


def purify(model, features_train, knots=None):
    """Purify a fitted model's effects over its training rows."""
    if knots is None:
        knots = model.config.knots if model.config is not None else 5
    return refine(build_store(model, features_train), features_train, knots)


def term_importance(store, features):
    """Rank terms by the standard deviation of their contribution.

    Returns a list of (kind, key, value) sorted descending, kind in
    {"main", "interaction"}; ties break toward the lexicographically
    smaller key so the ranking is deterministic.
    """
    features = np.asarray(features, dtype=np.float64)
    rows = []
    for j, pl in store.mains.items():
        rows.append(("main", (j,), float(pl.evaluate(features[:, j]).std())))
    for pair, eff in store.interactions.items():
        rows.append(("interaction", pair, float(eff.evaluate(features).std())))
    return sorted(rows, key=lambda r: (-r[2], r[0], r[1]))


@dataclass
class PairCheck:
    pair: tuple
    max_abs_inner: float
    max_ratio: float  # |inner| / (std(residual) * std(column)), worst column
    residual_std: float


@dataclass
class OrthogonalityReport:
    checks: list
    max_ratio: float

    def passed(self, tolerance=1e-6):
        return self.max_ratio <= tolerance


def verify_orthogonality(store, features, knots=5):
    """Inner products of each purified interaction with its variables' bases.

    For every pair (j, k) the residual surface is checked against the
    constant function and every hat-spline basis column of x_j and x_k (the
    stored fit bases when present, freshly placed knots otherwise). The
    reported ratio normalizes each inner product by std(residual)*std(column).
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    checks = []
    for pair in sorted(store.interactions):
        eff = store.interactions[pair]
        r = eff.evaluate(features)
        r_std = float(r.std())
        columns = [np.ones(n)]
        for var in pair:
            basis = None
            for comp in eff.components:
                if comp.var == var and comp.kind == SPLINE_COMPONENT:
                    basis = comp.basis
                    break
            if basis is None:
                try:
                    basis = fit_knots(features[:, var], knots)
                except DataError:
                    columns.append(features[:, var])
                    continue
            columns.extend(basis.evaluate(features[:, var]).T)
        worst_inner, worst_ratio = 0.0, 0.0
        for col in columns:
            inner = abs(float(np.mean(r * col)))
            scale = r_std * float(col.std()) if col.std() > 0 else r_std
            ratio = inner / scale if scale > 0 else (0.0 if inner == 0 else np.inf)
            worst_inner = max(worst_inner, inner)
            worst_ratio = max(worst_ratio, ratio)
        checks.append(PairCheck(pair, worst_inner, worst_ratio, r_std))
    max_ratio = max((c.max_ratio for c in checks), default=0.0)
    return OrthogonalityReport(checks, max_ratio)
