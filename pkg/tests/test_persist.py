"""Round-trip and failure-mode tests for model serialization."""
import json
from dataclasses import replace

import numpy as np
import pytest

from treegam.dataset import Dataset, make_bins, split, TRAIN
from treegam.errors import ModelFormatError
from treegam.losses import LossSpec
from treegam.model import FitConfig, fit, predict
from treegam.persist import (
    dumps_model,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from treegam.purify import purify


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(0)
    n = 3000
    x = rng.normal(size=(n, 4))
    y = x[:, 0] * x[:, 1] + np.abs(x[:, 2]) + 0.2 * rng.normal(size=n)
    names = tuple(f"x{j + 1}" for j in range(4))
    data = split(Dataset(x, names, y), (0.5, 0.25, 0.25), seed=0)
    bins = make_bins(data, max_bins=256)
    model = fit(data, bins, FitConfig(rounds=2, q=2))
    return data, model


@pytest.fixture(scope="module")
def purified(fitted):
    # copy so the shared fitted model keeps effects=None for other tests
    data, model = fitted
    store = purify(model, data.features[data.rows(TRAIN)])
    return data, replace(model, effects=store)


class TestRoundTrip:
    def test_serialization_is_byte_stable(self, purified, tmp_path):
        _, model = purified
        path = tmp_path / "model.json"
        save_model(model, path)
        first = path.read_bytes()
        reloaded = load_model(path)
        save_model(reloaded, path)
        assert path.read_bytes() == first
        assert first.endswith(b"\n")

    def test_raw_predictions_survive_exactly(self, purified, tmp_path):
        data, model = purified
        path = tmp_path / "model.json"
        save_model(model, path)
        reloaded = load_model(path)
        rows = data.features[:400]
        assert np.array_equal(predict(reloaded, rows), predict(model, rows))
        assert reloaded.intercept == model.intercept
        assert reloaded.feature_names == model.feature_names
        assert np.array_equal(reloaded.train_ranges, model.train_ranges)

    def test_effect_predictions_survive_to_summation_precision(
            self, purified, tmp_path):
        data, model = purified
        path = tmp_path / "model.json"
        save_model(model, path)
        reloaded = load_model(path)
        rows = data.features[:400]
        a = model.effects.predict(rows)
        b = reloaded.effects.predict(rows)
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.abs(a).max())
        got = [(kind, tuple(key)) for kind, key, _ in reloaded.effects.importance]
        want = [(kind, tuple(key)) for kind, key, _ in model.effects.importance]
        assert got == want
        assert [v for _, _, v in reloaded.effects.importance] == pytest.approx(
            [v for _, _, v in model.effects.importance], rel=1e-9)

    def test_structure_survives(self, purified, tmp_path):
        data, model = purified
        path = tmp_path / "model.json"
        save_model(model, path)
        reloaded = load_model(path)
        assert [t.term for t in reloaded.trees] == [t.term for t in model.trees]
        assert [t.stage for t in reloaded.trees] == [t.stage for t in model.trees]
        assert reloaded.main_features() == model.main_features()
        assert reloaded.interaction_pairs() == model.interaction_pairs()
        assert len(reloaded.rounds) == len(model.rounds)
        assert reloaded.rounds[0].main_trace == model.rounds[0].main_trace
        assert reloaded.config == model.config
        assert sorted(reloaded.effects.interactions) == \
            sorted(model.effects.interactions)

    def test_model_without_effects_roundtrips_with_none(self, fitted, tmp_path):
        _, model = fitted
        assert model.effects is None
        path = tmp_path / "raw.json"
        save_model(model, path)
        reloaded = load_model(path)
        assert reloaded.effects is None

    def test_intercept_only_model_roundtrips(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(300, 2))
        data = split(Dataset(x, ("a", "b"), x[:, 0]), (0.5, 0.25, 0.25), seed=1)
        bins = make_bins(data, max_bins=64)
        model = fit(data, bins, FitConfig(rounds=1, q=0, max_iterations=0))
        path = tmp_path / "empty.json"
        save_model(model, path)
        reloaded = load_model(path)
        assert reloaded.trees == []
        assert np.array_equal(predict(reloaded, x[:10]), predict(model, x[:10]))

    def test_dict_roundtrip_without_files(self, purified):
        _, model = purified
        clone = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        assert clone.intercept == model.intercept
        assert len(clone.trees) == len(model.trees)

    def test_logloss_spec_roundtrips(self, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2000, 3))
        y = (rng.uniform(size=2000) < 1 / (1 + np.exp(-x[:, 0]))).astype(float)
        data = split(Dataset(x, ("a", "b", "c"), y), (0.5, 0.25, 0.25), seed=2)
        bins = make_bins(data, max_bins=128)
        model = fit(data, bins, FitConfig(rounds=1, q=0, max_iterations=20,
                                          loss=LossSpec("logloss")))
        path = tmp_path / "binary.json"
        save_model(model, path)
        reloaded = load_model(path)
        assert reloaded.loss == model.loss


class TestFailureModes:
    def test_truncated_file_raises_format_error(self, purified, tmp_path):
        _, model = purified
        path = tmp_path / "model.json"
        save_model(model, path)
        path.write_text(path.read_text()[: 200])
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_garbage_file_raises_format_error(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("not json at all {{{")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_non_object_payload_raises(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]\n")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_unknown_version_raises(self, purified):
        _, model = purified
        payload = model_to_dict(model)
        payload["format_version"] = 99
        with pytest.raises(ModelFormatError, match="version"):
            model_from_dict(payload)

    def test_missing_key_raises_malformed_error(self, purified):
        _, model = purified
        payload = model_to_dict(model)
        del payload["intercept"]
        with pytest.raises(ModelFormatError, match="malformed"):
            model_from_dict(payload)

    def test_corrupt_tree_entry_raises(self, purified):
        _, model = purified
        payload = json.loads(dumps_model(model))
        payload["trees"][0]["root"] = {"bogus": True}
        with pytest.raises(ModelFormatError):
            model_from_dict(payload)

    def test_save_is_atomic(self, purified, tmp_path):
        _, model = purified
        path = tmp_path / "model.json"
        save_model(model, path)
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []


class TestCanonicalForm:
    def test_dumps_uses_sorted_keys_and_repr_floats(self, purified):
        _, model = purified
        text = dumps_model(model)
        payload = json.loads(text)
        assert list(payload) == sorted(payload)
        assert text == json.dumps(payload, sort_keys=True, indent=1) + "\n"
        assert payload["format_version"] == 1
        # full float precision survives the text form
        assert json.loads(text)["intercept"] == model.intercept
