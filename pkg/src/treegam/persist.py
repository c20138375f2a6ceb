"""JSON persistence for fitted models and their purified effects.

The on-disk form is canonical: keys are sorted and floats use Python's
shortest round-trip representation, so save -> load -> save is byte
identical and loaded models predict exactly like the originals.
"""
from __future__ import annotations

import json
import os

import numpy as np

from .errors import ModelFormatError
from .losses import LossSpec
from .model import AdditiveModel, FitConfig, RoundLog, TaggedTree
from .modeltree import FittedTree, TreeNode, TreeSpec
from .purify import (
    ComponentFunction,
    EffectStore,
    InteractionEffect,
    PiecewiseLinear,
)
from .splines import SplineBasis

FORMAT_VERSION = 1


def _floats(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def _node_to_dict(node):
    out = {"n_rows": int(node.n_rows), "sse": float(node.sse)}
    if node.is_leaf:
        out["coef"] = _floats(node.coef)
    else:
        out["threshold"] = float(node.threshold)
        out["left"] = _node_to_dict(node.left)
        out["right"] = _node_to_dict(node.right)
    return out


def _node_from_dict(d):
    if "coef" in d:
        return TreeNode(coef=np.array(d["coef"], dtype=np.float64),
                        n_rows=int(d["n_rows"]), sse=float(d["sse"]))
    return TreeNode(
        threshold=float(d["threshold"]),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
        n_rows=int(d["n_rows"]),
        sse=float(d["sse"]),
    )


def _spec_to_dict(spec):
    return {
        "model_var": spec.model_var,
        "split_var": spec.split_var,
        "design": spec.design,
        "knots": None if spec.basis is None else _floats(spec.basis.knots),
        "max_depth": spec.max_depth,
        "min_leaf": spec.min_leaf,
        "ridge": float(spec.ridge),
    }


def _spec_from_dict(d):
    basis = None if d["knots"] is None else SplineBasis(np.array(d["knots"]))
    return TreeSpec(int(d["model_var"]), int(d["split_var"]), d["design"],
                    basis, int(d["max_depth"]), int(d["min_leaf"]),
                    float(d["ridge"]))


def _config_to_dict(cfg):
    return {
        "rounds": cfg.rounds,
        "q": cfg.q,
        "learning_rate": float(cfg.learning_rate),
        "max_iterations": cfg.max_iterations,
        "patience": cfg.patience,
        "max_depth": cfg.max_depth,
        "min_leaf": cfg.min_leaf,
        "ridge": float(cfg.ridge),
        "knots": cfg.knots,
        "loss": {"kind": cfg.loss.kind, "hessian_floor": float(cfg.loss.hessian_floor)},
        "filter_method": cfg.filter_method,
        "grid_size": cfg.grid_size,
        "filter_sample_cap": cfg.filter_sample_cap,
        "seed": cfg.seed,
        "threads": cfg.threads,
    }


def _config_from_dict(d):
    d = dict(d)
    loss = LossSpec(d["loss"]["kind"], float(d["loss"]["hessian_floor"]))
    d["loss"] = loss
    return FitConfig(**d)


def _component_to_dict(comp):
    return {
        "var": comp.var,
        "kind": comp.kind,
        "knots": None if comp.basis is None else _floats(comp.basis.knots),
        "coef": _floats(comp.coef),
        "offset": float(comp.offset),
    }


def _component_from_dict(d):
    basis = None if d["knots"] is None else SplineBasis(np.array(d["knots"]))
    return ComponentFunction(int(d["var"]), d["kind"], basis,
                             np.array(d["coef"], dtype=np.float64),
                             float(d["offset"]))


def _effects_to_dict(store, tagged_trees):
    index_of = {id(t.tree): i for i, t in enumerate(tagged_trees)}
    interactions = {}
    for pair, eff in store.interactions.items():
        refs = []
        for scale, tree in eff.scaled_trees:
            key = id(tree)
            if key not in index_of:
                raise ModelFormatError(
                    "effect store references a tree that is not part of the model"
                )
            refs.append(index_of[key])
        interactions[f"{pair[0]},{pair[1]}"] = {
            "tree_refs": refs,
            "components": [_component_to_dict(c) for c in eff.components],
            "mu": float(eff.mu),
        }
    mains = {
        str(j): {
            "x": _floats(pl.x),
            "y": _floats(pl.y),
            "slope_lo": float(pl.slope_lo),
            "slope_hi": float(pl.slope_hi),
        }
        for j, pl in store.mains.items()
    }
    return {
        "intercept": float(store.intercept),
        "mains": mains,
        "interactions": interactions,
        "importance": [[kind, list(key), float(v)] for kind, key, v in store.importance],
    }


def _effects_from_dict(d, tagged_trees):
    mains = {
        int(j): PiecewiseLinear(
            np.array(m["x"], dtype=np.float64),
            np.array(m["y"], dtype=np.float64),
            float(m["slope_lo"]), float(m["slope_hi"]))
        for j, m in d["mains"].items()
    }
    interactions = {}
    for key, e in d["interactions"].items():
        j, k = (int(v) for v in key.split(","))
        scaled = [(tagged_trees[i].scale, tagged_trees[i].tree) for i in e["tree_refs"]]
        interactions[(j, k)] = InteractionEffect(
            (j, k), scaled,
            [_component_from_dict(c) for c in e["components"]],
            float(e["mu"]),
        )
    importance = [(kind, tuple(key), float(v)) for kind, key, v in d["importance"]]
    return EffectStore(float(d["intercept"]), mains, interactions, importance)


def model_to_dict(model):
    return {
        "format_version": FORMAT_VERSION,
        "intercept": float(model.intercept),
        "loss": {"kind": model.loss.kind,
                 "hessian_floor": float(model.loss.hessian_floor)},
        "feature_names": list(model.feature_names),
        "train_ranges": [[float(a), float(b)] for a, b in model.train_ranges],
        "config": _config_to_dict(model.config),
        "trees": [
            {
                "round": t.round,
                "stage": t.stage,
                "term": list(t.term),
                "scale": float(t.scale),
                "spec": _spec_to_dict(t.tree.spec),
                "root": _node_to_dict(t.tree.root),
            }
            for t in model.trees
        ],
        "rounds": [
            {
                "main_stop": r.main_stop,
                "int_stop": r.int_stop,
                "selected_pairs": [list(p) for p in r.selected_pairs],
                "main_trace": _floats(r.main_trace),
                "int_trace": _floats(r.int_trace),
            }
            for r in model.rounds
        ],
        "effects": None if model.effects is None
        else _effects_to_dict(model.effects, model.trees),
    }


def model_from_dict(payload):
    try:
        version = payload["format_version"]
        if version != FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model format version {version!r} "
                f"(this build reads version {FORMAT_VERSION})"
            )
        loss = LossSpec(payload["loss"]["kind"],
                        float(payload["loss"]["hessian_floor"]))
        trees = [
            TaggedTree(
                round=int(t["round"]),
                stage=t["stage"],
                term=tuple(int(v) for v in t["term"]),
                scale=float(t["scale"]),
                tree=FittedTree(_spec_from_dict(t["spec"]), _node_from_dict(t["root"])),
            )
            for t in payload["trees"]
        ]
        rounds = [
            RoundLog(
                main_stop=int(r["main_stop"]),
                int_stop=int(r["int_stop"]),
                selected_pairs=[tuple(int(v) for v in p) for p in r["selected_pairs"]],
                main_trace=[float(v) for v in r["main_trace"]],
                int_trace=[float(v) for v in r["int_trace"]],
            )
            for r in payload["rounds"]
        ]
        model = AdditiveModel(
            intercept=float(payload["intercept"]),
            trees=trees,
            rounds=rounds,
            loss=loss,
            feature_names=tuple(payload["feature_names"]),
            train_ranges=np.array(payload["train_ranges"], dtype=np.float64),
            config=_config_from_dict(payload["config"]),
        )
        if payload["effects"] is not None:
            model.effects = _effects_from_dict(payload["effects"], trees)
        return model
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model payload: {exc}") from exc


def dumps_model(model):
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def save_model(model, path):
    text = dumps_model(model)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_model(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise ModelFormatError(f"{path}: expected a JSON object at top level")
    return model_from_dict(payload)
