import math

import numpy as np
import pytest

from connframe.aspect_model import (
    AspectClassifier,
    featurize,
    featurize_many,
    load_models,
    model_from_dict,
    model_to_dict,
    nll_loss_and_grad,
    predict_label,
    predict_probs,
    save_models,
    train_all_aspects,
    train_aspect,
)
from connframe.core import ASPECTS, Aspect
from connframe.embeddings import EmbeddingTable
from connframe.errors import DataError, FormatError, VocabularyError
from connframe.selfcheck import fd_gradient, max_relative_error

from conftest import NEG, NEU, POS, make_frame

ASPECT = Aspect.AGENT_THEME


class TestFeaturize:
    def test_bias_appended(self):
        table = EmbeddingTable(3, {"v": np.array([0.1, 0.2, 0.3])})
        assert np.allclose(featurize("v", table), [0.1, 0.2, 0.3, 1.0])

    def test_zero_vector_keeps_bias(self):
        table = EmbeddingTable(2, {"v": np.zeros(2)})
        assert np.allclose(featurize("v", table), [0.0, 0.0, 1.0])

    def test_output_length(self, tiny_table):
        assert featurize("east", tiny_table).size == tiny_table.dim + 1

    def test_absent_verb(self, tiny_table):
        with pytest.raises(VocabularyError):
            featurize("ghost", tiny_table)


class TestPredictProbs:
    def model_with_bias_logits(self, logits):
        """Weights that produce the given logits for every input: only the
        bias column is nonzero."""
        model = AspectClassifier(ASPECT)
        W = np.zeros((3, 3))
        W[:, -1] = logits
        model.weights_ = W
        return model

    def test_zero_weights_uniform(self):
        model = AspectClassifier(ASPECT)
        model.weights_ = np.zeros((3, 4))
        probs = model.predict_proba(np.array([[0.5, -1.0, 2.0, 1.0]]))
        assert np.allclose(probs, 1 / 3)

    def test_hand_softmax(self):
        # logits (0, 0, ln 2) -> (0.25, 0.25, 0.5)
        model = self.model_with_bias_logits([0.0, 0.0, math.log(2.0)])
        probs = model.predict_proba(np.array([[0.0, 0.0, 1.0]]))[0]
        assert np.allclose(probs, [0.25, 0.25, 0.5], atol=1e-12)

    def test_shift_invariance(self):
        m1 = self.model_with_bias_logits([0.1, -0.4, 0.8])
        m2 = self.model_with_bias_logits([0.1 + 7.0, -0.4 + 7.0, 0.8 + 7.0])
        x = np.array([[0.0, 0.0, 1.0]])
        assert np.allclose(m1.predict_proba(x), m2.predict_proba(x), atol=1e-12)

    def test_simplex_property(self):
        rng = np.random.default_rng(11)
        model = AspectClassifier(ASPECT)
        model.weights_ = rng.normal(size=(3, 5))
        X = rng.normal(size=(100, 5))
        probs = model.predict_proba(X)
        assert np.all(probs >= 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_shape_error(self):
        model = AspectClassifier(ASPECT)
        model.weights_ = np.zeros((3, 4))
        with pytest.raises(DataError):
            model.predict_proba(np.zeros((1, 7)))


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        X = np.c_[rng.normal(size=(15, 3)), np.ones(15)]
        y_idx = rng.integers(0, 3, size=15)
        sw = rng.uniform(0.5, 2.0, size=15)
        for _ in range(5):
            w = rng.normal(scale=0.7, size=12)
            _, grad = nll_loss_and_grad(w, X, y_idx, sw, l2=1.3)
            fd = fd_gradient(lambda v: nll_loss_and_grad(v, X, y_idx, sw, 1.3)[0], w)
            assert max_relative_error(grad, fd) < 1e-4


class TestTraining:
    def fit_separable(self, separable_set, **params):
        table, labels = separable_set
        data = [(v, l) for v, l in labels.items()]
        params.setdefault("l2", 0.01)
        return train_aspect(data, ASPECT, table, **params), table, data

    def test_separable_reaches_perfect_training_accuracy(self, separable_set):
        model, table, data = self.fit_separable(separable_set)
        assert model.converged_
        for verb, label in data:
            assert predict_label(model, verb, table) is label

    def test_gd_optimizer_also_separates(self, separable_set):
        model, table, data = self.fit_separable(
            separable_set, optimizer="gd", max_iter=3000, tol=1e-4)
        hits = sum(predict_label(model, v, table) is l for v, l in data)
        assert hits == len(data)

    def test_loss_trace_non_increasing(self, separable_set):
        model, _, _ = self.fit_separable(separable_set)
        trace = model.loss_trace_
        assert all(a >= b - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_huge_l2_gives_uniform_predictions(self, separable_set):
        # Class-balanced 6-verb subset, so the unpenalized bias also tends
        # to the uniform distribution in the large-l2 limit.
        table, labels = separable_set
        data = [(v, labels[v]) for v in ["p1", "p2", "n1", "n2", "z1", "z2"]]
        model = train_aspect(data, ASPECT, table, l2=1e8)
        assert np.max(np.abs(model.weights_[:, :-1])) < 1e-6
        probs = predict_probs(model, "p1", table)
        assert np.allclose(probs, 1 / 3, atol=1e-4)

    def test_tie_breaks_to_negative(self):
        model = AspectClassifier(ASPECT)
        model.weights_ = np.zeros((3, 3))
        pred = model.predict(np.array([[1.0, 2.0, 1.0]]))
        assert pred[0] is NEG

    def test_equal_class_weight_dict_matches_uniform_exactly(self, separable_set):
        table, labels = separable_set
        data = list(labels.items())
        m1 = train_aspect(data, ASPECT, table)
        m2 = train_aspect(data, ASPECT, table,
                          class_weight={NEG: 1.0, NEU: 1.0, POS: 1.0})
        assert m1.loss_trace_ == m2.loss_trace_
        assert np.array_equal(m1.weights_, m2.weights_)

    def test_balanced_weights_change_boundary(self, separable_set):
        table, labels = separable_set
        data = list(labels.items())
        uniform = train_aspect(data, ASPECT, table)
        balanced = train_aspect(data, ASPECT, table, class_weight="balanced")
        assert not np.array_equal(uniform.weights_, balanced.weights_)

    def test_absent_class_still_has_weight_row(self, separable_set):
        table, _ = separable_set
        data = [("p1", POS), ("n1", NEG)]  # no neutral examples
        model = train_aspect(data, ASPECT, table)
        assert model.weights_.shape == (3, 3)
        probs = predict_probs(model, "p1", table)
        assert probs.shape == (3,)
        assert probs.sum() == pytest.approx(1.0)

    def test_empty_training_set(self, separable_set):
        table, _ = separable_set
        with pytest.raises(DataError):
            train_aspect([], ASPECT, table)

    def test_grid_mode_requires_dev(self, separable_set):
        table, labels = separable_set
        with pytest.raises(DataError):
            train_aspect(list(labels.items()), ASPECT, table,
                         class_weight="grid")

    def test_grid_mode_selects_multipliers(self, separable_set):
        table, labels = separable_set
        data = list(labels.items())
        model = train_aspect(data, ASPECT, table, class_weight="grid",
                             dev=data, max_iter=60)
        assert model.grid_multipliers_ in {
            (a, b, c) for a in (0.5, 1.0, 2.0) for b in (0.5, 1.0, 2.0)
            for c in (0.5, 1.0, 2.0)
        }

    def test_deterministic(self, separable_set):
        m1, _, _ = self.fit_separable(separable_set)
        m2, _, _ = self.fit_separable(separable_set)
        assert np.array_equal(m1.weights_, m2.weights_)


class TestEstimatorApi:
    def test_get_set_params(self):
        clf = AspectClassifier(ASPECT, l2=0.5)
        params = clf.get_params()
        assert params["l2"] == 0.5
        assert params["aspect"] is ASPECT
        clf.set_params(l2=2.0)
        assert clf.l2 == 2.0
        with pytest.raises(ValueError):
            clf.set_params(nonsense=1)

    def test_sklearn_clone_compatible(self):
        sklearn = pytest.importorskip("sklearn")
        from sklearn.base import clone

        clf = AspectClassifier(ASPECT, l2=0.5, class_weight="balanced")
        twin = clone(clf)
        assert twin.get_params() == clf.get_params()

    def test_unfitted_predict_raises(self):
        with pytest.raises(DataError, match="fit"):
            AspectClassifier(ASPECT).predict_proba(np.zeros((1, 3)))


class TestModelFiles:
    def test_roundtrip(self, separable_set, tmp_path):
        table, labels = separable_set
        frames = [make_frame(v, l) for v, l in labels.items()]
        models = train_all_aspects(frames, table, l2=0.01)
        save_models(models, tmp_path / "models")
        back = load_models(tmp_path / "models")
        X = featurize_many(sorted(labels), table)
        for aspect in ASPECTS:
            assert np.array_equal(models[aspect].weights_, back[aspect].weights_)
            assert models[aspect].predict(X) == back[aspect].predict(X)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_models(tmp_path)

    def test_bad_document(self):
        with pytest.raises(FormatError):
            model_from_dict({"aspect": "P_at", "dim": 2, "weights": [[0.0]],
                             "class_order": ["-", "=", "+"]})

    def test_dict_fields(self, separable_set):
        table, labels = separable_set
        model = train_aspect(list(labels.items()), ASPECT, table)
        doc = model_to_dict(model)
        assert doc["aspect"] == "P_at"
        assert doc["dim"] == 2
        assert doc["class_order"] == ["-", "=", "+"]
        assert len(doc["weights"]) == 3


class TestTrainAllAspects:
    def test_filters_unembedded_verbs(self, separable_set):
        table, labels = separable_set
        frames = [make_frame(v, l) for v, l in labels.items()]
        frames.append(make_frame("ghost", POS))
        models = train_all_aspects(frames, table, l2=0.01)
        assert models.n_filtered == 1
        assert set(models) == set(ASPECTS)

    def test_all_unembedded_is_error(self):
        table = EmbeddingTable(2, {"x": np.ones(2)})
        with pytest.raises(DataError):
            train_all_aspects([make_frame("ghost", POS)], table)

    def test_parallel_matches_serial(self, separable_set):
        table, labels = separable_set
        frames = [make_frame(v, l) for v, l in labels.items()]
        serial = train_all_aspects(frames, table, l2=0.01)
        parallel = train_all_aspects(frames, table, l2=0.01, jobs=2)
        for aspect in ASPECTS:
            assert np.array_equal(serial[aspect].weights_,
                                  parallel[aspect].weights_)
