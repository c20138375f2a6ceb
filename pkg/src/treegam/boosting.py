"""Newton boosting of model trees with validation-based early stopping.

One stage repeatedly: computes per-row derivatives of the loss at the current
score, fits one candidate tree per entry of the candidate set to the
pseudo-response, keeps the candidate with the smallest training weighted SSE,
and adds it scaled by the learning rate. The validation loss trace L_0..L_m
(L_0 is the incoming model's loss) drives stopping: at iteration m >= patience
the stage stops as soon as

    L_{m-patience} < min(L_{m-patience+1}, ..., L_m)

and the last ``patience`` trees are discarded, so the retained model is the
one the trace identifies as best. A stage that never improves on L_0 retains
zero trees. If the iteration cap is reached while the trace is still
improving, all trees are kept.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import TRAIN, VALIDATION
from .errors import DataError
from .losses import derivatives, mean_loss
from .modeltree import (
    LINEAR,
    SPLINE,
    BinnedGram,
    TreeSpec,
    design_matrix,
    design_part,
    fit_tree,
    penalty_diagonal,
    predict_tree,
    response_part,
)
from .splines import fit_knots


def default_min_leaf(n_train):
    """Leaf-size floor: max(20, 0.5% of training rows)."""
    return max(20, int(0.005 * n_train))


@dataclass(frozen=True)
class TreeTemplate:
    """Per-tree settings shared by every candidate in a stage."""

    max_depth: int = 2
    min_leaf: int = None  # None -> default_min_leaf(n_train)
    ridge: float = 1.0
    knots: int = 5


@dataclass(frozen=True)
class StageConfig:
    """Candidate terms and boosting controls for one stage.

    Candidates are (model_var, split_var) pairs; a pair with equal entries is
    a main-effect candidate, otherwise an oriented interaction candidate.
    """

    candidates: tuple
    learning_rate: float = 0.2
    max_iterations: int = 1000
    patience: int = 10

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(tuple(c) for c in self.candidates))
        if not 0 < self.learning_rate <= 1:
            raise DataError("learning_rate must be in (0, 1]")
        if self.max_iterations < 0 or self.patience < 1:
            raise DataError("bad max_iterations or patience")


@dataclass
class StageResult:
    """Retained trees of one stage, in the order they were added."""

    trees: list
    terms: list
    m_stop: int
    val_trace: list

    @property
    def retained_val_loss(self):
        return self.val_trace[self.m_stop]


def stop_fires(trace, m, patience):
    """The trace-defined stopping condition at iteration m (trace holds L_0..L_m)."""
    if m < patience:
        return False
    window = trace[m - patience + 1 : m + 1]
    return trace[m - patience] < min(window)


def retained_iteration(trace, patience):
    """Retained-tree count implied by a full validation trace L_0..L_M."""
    for m in range(1, len(trace)):
        if stop_fires(trace, m, patience):
            return m - patience
    return len(trace) - 1


class _Candidate:
    """Cached per-candidate state: design, bins and the reusable gram block."""

    def __init__(self, data, bins, term, template, train, bases):
        self.term = term
        mv, sv = term
        x_model = data.features[train, mv]
        if mv == sv:
            kind, basis = LINEAR, None
        else:
            basis = bases.get(mv)
            if mv not in bases:
                try:
                    basis = fit_knots(x_model, template.knots)
                except DataError:
                    basis = None  # too few distinct values; raw-linear leaf
                bases[mv] = basis
            kind = SPLINE if basis is not None else LINEAR
        min_leaf = template.min_leaf
        if min_leaf is None:
            min_leaf = default_min_leaf(train.size)
        self.spec = TreeSpec(
            model_var=mv,
            split_var=sv,
            design=kind,
            basis=basis,
            max_depth=template.max_depth,
            min_leaf=min_leaf,
            ridge=template.ridge,
        )
        self.design = design_matrix(self.spec, x_model)
        self.penalty = penalty_diagonal(kind, self.design)
        self.bins = bins.indices[train, sv]
        self.n_bins = int(bins.n_bins[sv])
        self.edges = bins.edges[sv]
        self._a = None
        self._counts = None

    def fit(self, z, h, h_changed):
        if self._a is None or h_changed:
            self._a, self._counts = design_part(self.design, self.bins, self.n_bins, h)
        c, s = response_part(self.design, self.bins, self.n_bins, z, h)
        gram = BinnedGram(self._a, c, s, self._counts, self.edges, self.penalty)
        return fit_tree(gram, self.spec)


def fit_stage(data, bins, loss, g, config, template=None, n_threads=1):
    """Run one boosting stage, updating the score vector g in place.

    g covers every row of ``data`` (train, validation and test) and on return
    reflects exactly the retained trees. Results are identical for any
    ``n_threads``; threads only spread candidate fits within an iteration.
    """
    template = template or TreeTemplate()
    train = data.rows(TRAIN)
    val = data.rows(VALIDATION)
    if train.size == 0 or val.size == 0:
        raise DataError("boosting needs non-empty training and validation splits")
    y = data.response
    trace = [mean_loss(loss, y[val], g[val])]
    if not config.candidates:
        return StageResult([], [], 0, trace)

    bases = {}
    cands = [_Candidate(data, bins, t, template, train, bases) for t in config.candidates]
    trees, terms = [], []
    increments = deque(maxlen=config.patience)
    hessian_static = loss.kind == "squared"
    pool = ThreadPoolExecutor(n_threads) if n_threads > 1 else None
    try:
        for m in range(1, config.max_iterations + 1):
            state = derivatives(loss, y[train], g[train])
            h_changed = not hessian_static and m > 1
            if pool is None:
                fits = [c.fit(state.z, state.h, h_changed) for c in cands]
            else:
                fits = list(pool.map(lambda c: c.fit(state.z, state.h, h_changed), cands))
            best = min(range(len(fits)), key=lambda i: (fits[i].train_sse, i))
            tree = fits[best]
            step = config.learning_rate * predict_tree(tree, data.features)
            g += step
            increments.append(step)
            trees.append(tree)
            terms.append(cands[best].term)
            trace.append(mean_loss(loss, y[val], g[val]))
            if stop_fires(trace, m, config.patience):
                for step in increments:
                    g -= step
                del trees[-config.patience:]
                del terms[-config.patience:]
                return StageResult(trees, terms, m - config.patience, trace)
    finally:
        if pool is not None:
            pool.shutdown()
    return StageResult(trees, terms, len(trees), trace)


def fit_main_stage(data, bins, loss, g, learning_rate=0.2, max_iterations=1000,
                   patience=10, template=None, n_threads=1):
    """Boost main-effect trees: one candidate per feature, splits on itself."""
    candidates = tuple((j, j) for j in range(data.n_features))
    config = StageConfig(candidates, learning_rate, max_iterations, patience)
    return fit_stage(data, bins, loss, g, config, template, n_threads)


def fit_interaction_stage(data, bins, loss, g, oriented_pairs, learning_rate=0.2,
                          max_iterations=1000, patience=10, template=None,
                          n_threads=1):
    """Boost interaction trees over an oriented candidate pair set.

    ``oriented_pairs`` are (model_var, split_var) with distinct entries, as
    produced by the interaction filters. An empty set is a no-op stage.
    """
    for mv, sv in oriented_pairs:
        if mv == sv:
            raise DataError("interaction candidates need distinct variables")
    config = StageConfig(tuple(oriented_pairs), learning_rate, max_iterations, patience)
    return fit_stage(data, bins, loss, g, config, template, n_threads)
