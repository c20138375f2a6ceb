"""Boosted model trees for additive models with pairwise interactions.

The library fits functions of the form

    g(x) = intercept + sum_j f_j(x_j) + sum_{j<k} f_jk(x_j, x_k)

by Newton boosting of shallow model-based trees: main effects use trees
that split and regress on the same feature, interactions use trees that
split on one feature and fit a hat-spline in the other. Candidate pairs
are screened either with single model trees or with a fast quadrant
heuristic, and a fitted ensemble can be decomposed post hoc into centered,
mutually orthogonal effect functions for inspection.
"""
from .boosting import (
    StageConfig,
    StageResult,
    TreeTemplate,
    fit_interaction_stage,
    fit_main_stage,
    fit_stage,
)
from .dataset import (
    TEST,
    TRAIN,
    VALIDATION,
    BinMap,
    Dataset,
    bin_values,
    load_csv,
    make_bins,
    split,
)
from .errors import DataError, ModelFormatError, NumericalError
from .filtering import FilterResult, PairScore, quadrant_filter, quadrant_scores, tree_filter
from .losses import LossSpec, NewtonState, derivatives, initial_score, mean_loss
from .metrics import auc, binary_logloss, mse
from .model import AdditiveModel, FitConfig, RoundLog, TaggedTree, fit, predict, predict_proba
from .modeltree import FittedTree, TreeSpec, accumulate_gram, fit_tree, predict_tree
from .persist import dumps_model, load_model, model_from_dict, model_to_dict, save_model
from .purify import (
    EffectStore,
    InteractionEffect,
    OrthogonalityReport,
    PiecewiseLinear,
    purify,
    refine,
    term_importance,
    verify_orthogonality,
)
from .simulate import SimConfig, TruthOracle, generate
from .splines import SplineBasis, fit_knots

__version__ = "0.1.0"

__all__ = [
    "AdditiveModel",
    "BinMap",
    "DataError",
    "Dataset",
    "EffectStore",
    "FilterResult",
    "FitConfig",
    "FittedTree",
    "InteractionEffect",
    "LossSpec",
    "ModelFormatError",
    "NewtonState",
    "NumericalError",
    "OrthogonalityReport",
    "PairScore",
    "PiecewiseLinear",
    "RoundLog",
    "SimConfig",
    "SplineBasis",
    "StageConfig",
    "StageResult",
    "TaggedTree",
    "TEST",
    "TRAIN",
    "TreeSpec",
    "TreeTemplate",
    "TruthOracle",
    "VALIDATION",
    "accumulate_gram",
    "auc",
    "bin_values",
    "binary_logloss",
    "derivatives",
    "dumps_model",
    "fit",
    "fit_interaction_stage",
    "fit_knots",
    "fit_main_stage",
    "fit_stage",
    "fit_tree",
    "generate",
    "initial_score",
    "load_csv",
    "load_model",
    "make_bins",
    "mean_loss",
    "model_from_dict",
    "model_to_dict",
    "mse",
    "predict",
    "predict_proba",
    "predict_tree",
    "purify",
    "quadrant_filter",
    "quadrant_scores",
    "refine",
    "save_model",
    "split",
    "term_importance",
    "tree_filter",
    "verify_orthogonality",
]
