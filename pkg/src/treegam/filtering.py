"""Interaction screening: rank feature pairs by residual structure.

Both screens work on one Newton state computed from the current score (so
mains fitted so far are already subtracted through the pseudo-response) and
return the q most promising unordered pairs.

`tree_filter` fits one depth-limited interaction tree per orientation of each
pair, T(model=j, split=k) and T(model=k, split=j), and scores the pair by the
smaller of the two training weighted SSEs. This is the screen the fitting
loop uses; the selected pairs are handed to the interaction stage with both
orientations as candidates.

`quadrant_filter` is the cheaper classical baseline: for each pair it grid
searches a cut point per feature and fits a weighted constant to the
pseudo-response in each of the four quadrants, scoring the pair by the best
achievable weighted SSE. Implemented with 2-d cumulative sums over the cut
grid so each pair costs O(grid_size^2) after binning.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .boosting import TreeTemplate, default_min_leaf
from .dataset import TRAIN
from .errors import DataError
from .losses import derivatives
from .modeltree import (
    LINEAR,
    SPLINE,
    BinnedGram,
    TreeSpec,
    build_design,
    design_part,
    fit_tree,
    penalty_diagonal,
    response_part,
)
from .splines import fit_knots


@dataclass(frozen=True)
class PairScore:
    """Score of one unordered pair (j < k); smaller means stronger signal."""

    pair: tuple
    sse_jk: float  # tree with model_var=j, split_var=k (symmetric screens repeat it)
    sse_kj: float
    score: float


@dataclass
class FilterResult:
    """Ranked pair scores and the oriented candidate set for the top q."""

    scores: list  # all pairs, ranked ascending by score
    selected: list  # top q PairScores
    oriented_pairs: list  # both orientations of each selected pair, rank order

    @property
    def ranked_pairs(self):
        return [s.pair for s in self.scores]


def _training_state(data, loss, g, sample_cap, seed):
    train = data.rows(TRAIN)
    if train.size == 0:
        raise DataError("interaction screening needs training rows")
    if sample_cap is not None and train.size > sample_cap:
        rng = np.random.default_rng(seed)
        train = np.sort(rng.choice(train, size=sample_cap, replace=False))
    state = derivatives(loss, data.response[train], g[train])
    return train, state


def _rank(scores, q):
    if q > len(scores):
        raise DataError(f"q={q} exceeds the {len(scores)} available pairs")
    ranked = sorted(scores, key=lambda s: (s.score, s.pair))
    selected = ranked[:q]
    oriented = []
    for s in selected:
        j, k = s.pair
        oriented.append((j, k))
        oriented.append((k, j))
    return FilterResult(ranked, selected, oriented)


class _OrientedFit:
    """Design/bin caches for single interaction-tree fits, per orientation."""

    def __init__(self, data, bins, train, template):
        self.template = template
        self.min_leaf = template.min_leaf or default_min_leaf(train.size)
        self.x = {}
        self.bases = {}
        self.designs = {}
        self.penalties = {}
        self.bins = {}
        self.data, self.binmap, self.train = data, bins, train

    def _model_side(self, mv):
        if mv not in self.designs:
            x = self.data.features[self.train, mv]
            try:
                basis = fit_knots(x, self.template.knots)
            except DataError:
                basis = None
            kind = SPLINE if basis is not None else LINEAR
            d = build_design(kind, basis, x)
            self.bases[mv] = basis
            self.designs[mv] = d
            self.penalties[mv] = penalty_diagonal(kind, d)
        return self.bases[mv], self.designs[mv], self.penalties[mv]

    def _split_side(self, sv):
        if sv not in self.bins:
            self.bins[sv] = self.binmap.indices[self.train, sv]
        return self.bins[sv], int(self.binmap.n_bins[sv]), self.binmap.edges[sv]

    def sse(self, mv, sv, z, h):
        basis, design, penalty = self._model_side(mv)
        b, n_bins, edges = self._split_side(sv)
        kind = SPLINE if basis is not None else LINEAR
        spec = TreeSpec(mv, sv, kind, basis, self.template.max_depth,
                        self.min_leaf, self.template.ridge)
        a, counts = design_part(design, b, n_bins, h)
        c, s = response_part(design, b, n_bins, z, h)
        tree = fit_tree(BinnedGram(a, c, s, counts, edges, penalty), spec)
        return max(tree.train_sse, 0.0)


def tree_filter(data, bins, loss, g, q, features=None, template=None,
                sample_cap=1_000_000, seed=0, n_threads=1):
    """Rank pairs by the better of the two oriented interaction-tree fits."""
    if q == 0:
        return FilterResult([], [], [])
    template = template or TreeTemplate()
    train, state = _training_state(data, loss, g, sample_cap, seed)
    features = list(range(data.n_features)) if features is None else list(features)
    fitter = _OrientedFit(data, bins, train, template)
    pairs = list(combinations(sorted(features), 2))
    if not pairs:
        raise DataError("need at least two features to screen pairs")

    def score(pair):
        j, k = pair
        sse_jk = fitter.sse(j, k, state.z, state.h)
        sse_kj = fitter.sse(k, j, state.z, state.h)
        return PairScore(pair, sse_jk, sse_kj, min(sse_jk, sse_kj))

    if n_threads > 1:
        # warm the per-feature caches serially so threads only read them
        for f in features:
            fitter._model_side(f)
            fitter._split_side(f)
        with ThreadPoolExecutor(n_threads) as pool:
            scores = list(pool.map(score, pairs))
    else:
        scores = [score(p) for p in pairs]
    return _rank(scores, q)


def _cut_grid(x, grid_size):
    levels = np.arange(1, grid_size + 1) / (grid_size + 1)
    return np.unique(np.quantile(x, levels))


def _padded_cumsum2d(values, cells_j, cells_k, shape):
    table = np.zeros(shape)
    np.add.at(table, (cells_j, cells_k), values)
    out = np.zeros((shape[0] + 1, shape[1] + 1))
    out[1:, 1:] = table.cumsum(axis=0).cumsum(axis=1)
    return out


def quadrant_scores(x_j, x_k, z, h, grid_size=16):
    """Best 4-quadrant constant fit over a cut grid for one pair.

    Returns (weighted SSE, (cut_j, cut_k), quadrant means). Cuts partition by
    value < cut versus >= cut; empty quadrants contribute nothing.
    """
    cuts_j = _cut_grid(x_j, grid_size)
    cuts_k = _cut_grid(x_k, grid_size)
    cells_j = np.searchsorted(cuts_j, x_j, side="right")
    cells_k = np.searchsorted(cuts_k, x_k, side="right")
    shape = (cuts_j.size + 1, cuts_k.size + 1)
    hz = h * z
    cum_w = _padded_cumsum2d(h, cells_j, cells_k, shape)
    cum_wz = _padded_cumsum2d(hz, cells_j, cells_k, shape)
    total_w = cum_w[-1, -1]
    total_wz = cum_wz[-1, -1]
    total_wzz = float(np.sum(hz * z))

    # quadrant sums for every cut pair at once; cut index c keeps cells <= c left
    def quads(cum, total):
        ll = cum[1:-1, 1:-1]
        row = cum[1:-1, -1:]
        col = cum[-1:, 1:-1]
        return ll, row - ll, col - ll, total - row - col + ll

    w4 = quads(cum_w, total_w)
    wz4 = quads(cum_wz, total_wz)
    gain = np.zeros_like(w4[0])
    for w, wz in zip(w4, wz4):
        gain += np.divide(wz * wz, w, out=np.zeros_like(gain), where=w > 0)
    best_flat = int(np.argmin(total_wzz - gain))
    bj, bk = np.unravel_index(best_flat, gain.shape)
    sse = float(max(total_wzz - gain[bj, bk], 0.0))
    means = tuple(
        float(wz[bj, bk] / w[bj, bk]) if w[bj, bk] > 0 else 0.0
        for w, wz in zip(w4, wz4)
    )
    return sse, (float(cuts_j[bj]), float(cuts_k[bk])), means


def quadrant_filter(data, loss, g, q, grid_size=16, features=None,
                    sample_cap=1_000_000, seed=0, n_threads=1):
    """Rank pairs by the best 4-quadrant constant fit to the pseudo-response."""
    if q == 0:
        return FilterResult([], [], [])
    train, state = _training_state(data, loss, g, sample_cap, seed)
    features = list(range(data.n_features)) if features is None else list(features)
    pairs = list(combinations(sorted(features), 2))
    if not pairs:
        raise DataError("need at least two features to screen pairs")
    cols = {f: data.features[train, f] for f in features}

    def score(pair):
        j, k = pair
        sse, _, _ = quadrant_scores(cols[j], cols[k], state.z, state.h, grid_size)
        return PairScore(pair, sse, sse, sse)

    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            scores = list(pool.map(score, pairs))
    else:
        scores = [score(p) for p in pairs]
    return _rank(scores, q)
