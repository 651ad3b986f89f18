from __future__ import annotations

import io
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from courtrel.corpus import LABEL_ORDER, RelationLabel as R
from courtrel.errors import ManifestMismatchError, ModelCorruptError, ModelVersionError, TrainingError
from courtrel.features import FeatureVector
from courtrel.svm import (
    SvmModel, TrainingConfig, accuracy, cross_validate, dumps_model, example_weights, format_feature_table,
    load_model, loads_model, predict, read_feature_table, save_model, select_lambda,
    stratified_folds, train, train_with_trace, vector_values,
)


@pytest.fixture(scope="module")
def separable(request):
    from courtrel._resources import data_path
    with open(data_path("synthetic_separable.tsv"), encoding="utf-8") as fh:
        return read_feature_table(fh)


@pytest.fixture(scope="module")
def trained(separable):
    return train_with_trace(separable)


def zero_model(biases, classes=LABEL_ORDER):
    return SvmModel(classes, [[0.0] * 16 for _ in classes], biases)


class TestTraining:
    def test_fixture_shape(self, separable):
        labels = [lab for _, lab in separable]
        assert labels.count(R.NO_RELATION) == 50 and labels.count(R.ELABORATION) == 50

    def test_separable_perfect(self, trained, separable):
        model, _ = trained
        assert accuracy(model, separable) == 1.0
        assert model.classes == (R.ELABORATION, R.NO_RELATION)

    def test_held_out_vector(self, trained):
        model, _ = trained
        assert predict(model, [0.9] * 16)[0] is R.ELABORATION
        assert predict(model, [0.05] * 16)[0] is R.NO_RELATION

    def test_tail_objective_non_increasing(self, trained):
        _, trace = trained
        tail = len(trace.averaged) - len(trace.averaged) // 4 - 1
        for hist in (trace.averaged, trace.kept):
            assert all(b <= a for a, b in zip(hist[tail:], hist[tail + 1:]))

    def test_single_label(self):
        with pytest.raises(TrainingError):
            train([([0.0] * 16, R.ELABORATION), ([1.0] * 16, R.ELABORATION)])

    def test_empty(self):
        with pytest.raises(TrainingError):
            train([])

    def test_manifest_mismatch(self):
        with pytest.raises(ManifestMismatchError):
            train([([0.0] * 15, R.ELABORATION), ([1.0] * 15, R.NO_RELATION)])

    def test_seeded_runs_identical(self, separable):
        cfg = TrainingConfig(seed=7, epochs=10)
        assert dumps_model(train(separable, cfg)) == dumps_model(train(separable, cfg))

    def test_permutation_invariant(self, separable):
        shuffled = list(separable)
        random.Random(5).shuffle(shuffled)
        cfg = TrainingConfig(epochs=5)
        assert dumps_model(train(separable, cfg)) == dumps_model(train(shuffled, cfg))

    def test_cst_labels_accepted(self):
        from courtrel.corpus import CstRelation
        model = train([([0.0] * 16, CstRelation.IDENTITY), ([1.0] * 16, CstRelation.SUBSUMPTION)],
                      TrainingConfig(epochs=3))
        assert model.classes == (R.ELABORATION, R.REDUNDANCY)

    def test_bad_config(self):
        for kwargs in ({"lam": 0}, {"lam": float("nan")}, {"epochs": 0}, {"class_weighting": "none"}):
            with pytest.raises(TrainingError):
                TrainingConfig(**kwargs)


class TestWeights:
    def test_uniform(self):
        assert example_weights([R.ELABORATION] * 3 + [R.NO_RELATION], "uniform") == [0.25] * 4

    def test_inverse_frequency(self):
        w = example_weights([R.ELABORATION] * 3 + [R.NO_RELATION], "inverse-frequency")
        assert w == pytest.approx([1 / 6, 1 / 6, 1 / 6, 1 / 2])
        assert sum(w) == pytest.approx(1.0)

    @given(st.integers(1, 20), st.integers(1, 20), st.integers(2, 5))
    def test_duplication_keeps_class_mass(self, a, b, times):
        labels = [R.ELABORATION] * a + [R.NO_RELATION] * b
        dup = [R.ELABORATION] * (a * times) + [R.NO_RELATION] * b
        w1 = example_weights(labels, "inverse-frequency")
        w2 = example_weights(dup, "inverse-frequency")
        assert w1[0] * a == pytest.approx(w2[0] * a * times)


class TestPredict:
    def test_forced_argmax(self):
        assert predict(zero_model([1, 0, 0, 0, 0]), [0.3] * 16)[0] is R.ELABORATION
        assert predict(zero_model([0, 0, 0, 0, 1]), [0.3] * 16)[0] is R.REDUNDANCY

    def test_tie_goes_to_elaboration(self):
        label, per_class = predict(zero_model([0.5] * 5), [0.3] * 16)
        assert label is R.ELABORATION and set(per_class.values()) == {0.5}

    def test_tie_order_ignores_class_order(self):
        model = zero_model([0.0] * 3, classes=(R.REDUNDANCY, R.CITATION, R.NO_RELATION))
        assert predict(model, [0.0] * 16)[0] is R.NO_RELATION

    def test_accepts_vector_and_mapping(self, trained):
        model, _ = trained
        fv = FeatureVector.from_values([0.9] * 16)
        assert predict(model, fv)[0] is predict(model, fv.as_dict())[0] is R.ELABORATION

    def test_mapping_mismatch(self, trained):
        with pytest.raises(ManifestMismatchError):
            predict(trained[0], {"word_cos": 1.0})
        with pytest.raises(ManifestMismatchError):
            vector_values([0.0] * 3)

    @settings(max_examples=200)
    @given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.lists(st.floats(0, 1), min_size=16, max_size=16),
           st.integers(-20, 20))
    def test_scale_consistent(self, biases, x, power):
        # Power-of-two scaling is exact in binary floating point, so no tie can be created or broken.
        model = SvmModel(LABEL_ORDER, [[(i + 1) * (j - 7) / 13 for j in range(16)] for i in range(5)], biases)
        c = 2.0 ** power
        scaled = SvmModel(LABEL_ORDER, [[w * c for w in row] for row in model.weights], [b * c for b in biases])
        assert predict(model, x)[0] is predict(scaled, x)[0]

    @settings(max_examples=200)
    @given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.floats(0.01, 100))
    def test_scale_consistent_any_factor(self, biases, c):
        model = zero_model(biases)
        scaled = zero_model([b * c for b in biases])
        top = max(biases)
        if sum(1 for b in biases if top - b <= 1e-9 * max(1.0, abs(top))) == 1:
            assert predict(model, [0.0] * 16)[0] is predict(scaled, [0.0] * 16)[0]


class TestCrossValidation:
    def test_separable_two_fold(self, separable):
        cv = cross_validate(separable, k=2)
        assert cv.mean_accuracy == 1.0 and cv.std_accuracy == 0.0
        assert cv.metrics[R.ELABORATION].f1 == 1.0

    def test_k_too_large(self):
        data = [([0.0] * 16, R.ELABORATION)] * 5 + [([1.0] * 16, R.NO_RELATION)] * 3
        with pytest.raises(TrainingError):
            cross_validate(data, k=4)
        with pytest.raises(TrainingError):
            cross_validate(data, k=1)

    def test_assignments_repeatable(self, separable):
        a = cross_validate(separable, k=5, config=TrainingConfig(epochs=2))
        b = cross_validate(separable, k=5, config=TrainingConfig(epochs=2))
        assert a.assignments == b.assignments

    @given(st.lists(st.sampled_from(LABEL_ORDER[:3]), min_size=0, max_size=60), st.integers(2, 4), st.integers())
    def test_stratified_balance(self, labels, k, seed):
        if any(0 < labels.count(lab) < k for lab in set(labels)):
            with pytest.raises(TrainingError):
                stratified_folds(labels, k, seed)
            return
        folds = stratified_folds(labels, k, seed)
        for lab in set(labels):
            sizes = [sum(1 for l, f in zip(labels, folds) if l == lab and f == i) for i in range(k)]
            assert max(sizes) - min(sizes) <= 1

    def test_select_lambda(self, separable):
        lam, table = select_lambda(separable, [1e-3, 1e-2], k=2, config=TrainingConfig(epochs=5))
        assert lam in table and set(table) == {1e-3, 1e-2}


class TestSerialization:
    def test_round_trip(self, trained, tmp_path):
        model, _ = trained
        path = tmp_path / "m.json"
        save_model(model, path)
        assert load_model(path) == model
        buf = io.StringIO()
        save_model(model, buf)
        assert loads_model(buf.getvalue()) == model

    def test_bit_identical_files(self, separable, tmp_path):
        save_model(train(separable), tmp_path / "a.json")
        save_model(train(separable), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_truncated(self, trained):
        text = dumps_model(trained[0])
        with pytest.raises(ModelCorruptError):
            loads_model(text[: len(text) // 2])

    def test_tampered(self, trained):
        data = json.loads(dumps_model(trained[0]))
        data["payload"]["biases"][0] = (1.5).hex()
        with pytest.raises(ModelCorruptError):
            loads_model(json.dumps(data))

    def test_future_version(self, trained):
        data = json.loads(dumps_model(trained[0]))
        data["format_version"] = 99
        with pytest.raises(ModelVersionError):
            loads_model(json.dumps(data))

    def test_feature_table_round_trip(self, separable):
        text = format_feature_table(separable)
        assert read_feature_table(io.StringIO(text)) == separable
