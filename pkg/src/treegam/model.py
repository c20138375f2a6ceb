"""Fitting loop for additive models with pairwise interactions.

The model is an intercept plus scaled model trees grouped into terms:
main-effect trees for single features and interaction trees for oriented
feature pairs. Fitting alternates rounds of

    1. boost main-effect trees to convergence,
    2. screen all feature pairs on the updated residual state,
    3. boost interaction trees over the selected pairs,

and stops after ``rounds`` rounds or as soon as one full round retains no
tree in either stage. The candidate pair set is re-derived fresh each round,
so pairs masked by earlier rounds can surface later.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .boosting import StageConfig, TreeTemplate, fit_interaction_stage, fit_main_stage
from .dataset import TRAIN
from .errors import DataError
from .filtering import quadrant_filter, tree_filter
from .losses import LossSpec, initial_score, sigmoid

FILTER_METHODS = ("tree", "quadrant")


@dataclass(frozen=True)
class FitConfig:
    """Everything the fitting loop needs besides the data."""

    rounds: int = 5
    q: int = 10
    learning_rate: float = 0.2
    max_iterations: int = 1000
    patience: int = 10
    max_depth: int = 2
    min_leaf: int = None
    ridge: float = 1.0
    knots: int = 5
    loss: LossSpec = field(default_factory=LossSpec)
    filter_method: str = "tree"
    grid_size: int = 16
    filter_sample_cap: int = 1_000_000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise DataError("rounds must be at least 1")
        if self.q < 0:
            raise DataError("q must be non-negative")
        if self.filter_method not in FILTER_METHODS:
            raise DataError(f"filter_method must be one of {FILTER_METHODS}")

    @property
    def template(self):
        return TreeTemplate(self.max_depth, self.min_leaf, self.ridge, self.knots)


@dataclass
class TaggedTree:
    """One retained tree plus where it came from."""

    round: int
    stage: str  # "main" | "interaction"
    term: tuple  # (model_var, split_var)
    scale: float  # learning rate applied to this tree's predictions
    tree: object

    @property
    def pair(self):
        """Unordered pair key for interaction trees, None for mains."""
        if self.stage != "interaction":
            return None
        return tuple(sorted(self.term))


@dataclass
class RoundLog:
    main_stop: int
    int_stop: int
    selected_pairs: list  # unordered pairs chosen by the screen this round
    main_trace: list
    int_trace: list


@dataclass
class AdditiveModel:
    intercept: float
    trees: list  # TaggedTree, in the order they were retained
    rounds: list  # RoundLog per executed round
    loss: LossSpec
    feature_names: tuple
    train_ranges: np.ndarray  # (p, 2) training min/max per feature
    config: FitConfig
    effects: object = None  # EffectStore once purified

    @property
    def n_features(self):
        return len(self.feature_names)

    def main_features(self):
        return sorted({t.term[0] for t in self.trees if t.stage == "main"})

    def interaction_pairs(self):
        return sorted({t.pair for t in self.trees if t.stage == "interaction"})


def fit(data, bins, config=None):
    """Fit an `AdditiveModel`; see the module docstring for the loop."""
    config = config or FitConfig()
    train = data.rows(TRAIN)
    if train.size == 0:
        raise DataError("training split is empty")
    y = data.response
    g0 = initial_score(config.loss, y[train])
    g = np.full(data.n_rows, g0, dtype=np.float64)
    stage_kw = dict(
        learning_rate=config.learning_rate,
        max_iterations=config.max_iterations,
        patience=config.patience,
        template=config.template,
        n_threads=config.threads,
    )
    trees, rounds = [], []
    for r in range(1, config.rounds + 1):
        main = fit_main_stage(data, bins, config.loss, g, **stage_kw)
        for term, t in zip(main.terms, main.trees):
            trees.append(TaggedTree(r, "main", term, config.learning_rate, t))

        if config.q > 0:
            if config.filter_method == "tree":
                screen = tree_filter(
                    data, bins, config.loss, g, config.q,
                    template=config.template,
                    sample_cap=config.filter_sample_cap,
                    seed=config.seed, n_threads=config.threads,
                )
            else:
                screen = quadrant_filter(
                    data, config.loss, g, config.q, grid_size=config.grid_size,
                    sample_cap=config.filter_sample_cap,
                    seed=config.seed, n_threads=config.threads,
                )
            oriented = screen.oriented_pairs
            selected = [s.pair for s in screen.selected]
        else:
            oriented, selected = [], []
        inter = fit_interaction_stage(data, bins, config.loss, g, oriented, **stage_kw)
        for term, t in zip(inter.terms, inter.trees):
            trees.append(TaggedTree(r, "interaction", term, config.learning_rate, t))

        rounds.append(RoundLog(
            main_stop=main.m_stop,
            int_stop=inter.m_stop,
            selected_pairs=selected,
            main_trace=main.val_trace,
            int_trace=inter.val_trace,
        ))
        if main.m_stop == 0 and inter.m_stop == 0:
            break

    ranges = np.column_stack([
        data.features[train].min(axis=0),
        data.features[train].max(axis=0),
    ])
    return AdditiveModel(
        intercept=g0,
        trees=trees,
        rounds=rounds,
        loss=config.loss,
        feature_names=data.feature_names,
        train_ranges=ranges,
        config=config,
    )


def predict(model, features):
    """Additive score for raw feature rows: intercept plus scaled trees."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise DataError(
            f"expected a 2-d array with {model.n_features} columns"
        )
    out = np.full(features.shape[0], model.intercept, dtype=np.float64)
    for tagged in model.trees:
        out += tagged.scale * tagged.tree.predict(features)
    return out


def predict_proba(model, features):
    """Event probabilities for a logloss model."""
    if model.loss.kind != "logloss":
        raise DataError("probabilities are defined for the logloss model only")
    return sigmoid(predict(model, features))
