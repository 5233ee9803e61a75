import dataclasses

import numpy as np
import pytest

from runvar.distribution import BinningSpec
from runvar.clustering import ShapeModel
from runvar.errors import EmptyTest, SchemaMismatch
from runvar.features import ExampleSet, FeatureSchema
from runvar.forest import ForestParams, predict_proba
from runvar.predictor import (
    evaluate,
    gini_importance,
    ks_distance_weighted,
    predict_cluster,
    select_features,
    train_classifier,
    weighted_quantiles,
)

SPEC = BinningSpec.ratio_default()


def _toy_schema(names):
    return FeatureSchema(tuple(names), tuple("intrinsic" for _ in names), (), ())


def _example_set(x, y, runtimes=None, medians=None, schema=None, n_prior=None):
    n, d = x.shape
    names = [f"f{i}" for i in range(d - 1)] + ["n_prior_occurrences"]
    schema = schema or _toy_schema(names)
    if n_prior is not None:
        x = x.copy()
        x[:, -1] = n_prior
    from helpers import at

    return ExampleSet(
        schema=schema,
        X=np.asarray(x, dtype=np.float64),
        y=None if y is None else np.asarray(y, dtype=np.int64),
        runtimes=np.asarray(runtimes if runtimes is not None else np.ones(n)),
        hist_medians=np.asarray(medians if medians is not None else np.ones(n)),
        group_keys=[None] * n,
        instance_ids=[f"i{j}" for j in range(n)],
        submit_times=[at(j) for j in range(n)],
    )


class TestPredictCluster:
    def test_single_vector_path(self, small_pipeline):
        test = small_pipeline["test"]
        clf = small_pipeline["classifier"]
        fv = test.feature_vector(0)
        proba, cluster = predict_cluster(clf, fv)
        assert proba.sum() == pytest.approx(1.0, abs=1e-9)
        assert cluster == int(predict_proba(clf, test.X[:1]).argmax())

    def test_schema_mismatch(self, small_pipeline):
        clf = small_pipeline["classifier"]
        test = small_pipeline["test"]
        wrong = test.restrict(test.schema.subset(["vertex_count", "token_alloc"]))
        with pytest.raises(SchemaMismatch):
            predict_cluster(clf, wrong.feature_vector(0))


class TestSelectFeatures:
    def test_duplicate_column_dropped(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(300, 4))
        x[:, 2] = x[:, 0]  # exact duplicate
        y = (x[:, 0] > 0).astype(int)
        es = _example_set(x, y)
        out = select_features(es, threshold=0.0, params=ForestParams(n_trees=10, seed=0))
        assert ("f0" in out.names) != ("f2" in out.names)  # exactly one survives

    def test_noise_features_kept_at_zero_threshold(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(200, 5))
        y = rng.integers(0, 2, 200)
        es = _example_set(x, y)
        out = select_features(es, threshold=0.0, params=ForestParams(n_trees=10, seed=1))
        assert out.names == es.schema.names

    def test_hand_applied_rule(self):
        rng = np.random.default_rng(2)
        n = 400
        informative = rng.normal(size=(n, 3)) * 3
        dupes = informative.copy()
        noise = rng.normal(size=(n, 3)) * 0.01
        x = np.hstack([informative, dupes, noise])
        y = ((informative[:, 0] + informative[:, 1] + informative[:, 2]) > 0).astype(int)
        es = _example_set(np.hstack([x, np.zeros((n, 1))]), y)
        params = ForestParams(n_trees=20, seed=2)
        model = train_classifier(es, params)
        imp = np.asarray(list(gini_importance(model).values()))
        threshold = float(np.median(imp))
        out = select_features(es, threshold=threshold, params=params)
        # oracle: drop the lower-importance member of each duplicate pair,
        # then apply the threshold to the survivors
        expected = []
        dropped = set()
        for i, j in ((0, 3), (1, 4), (2, 5)):
            dropped.add(j if imp[i] >= imp[j] else i)
        for idx, name in enumerate(es.schema.names):
            if idx in dropped or imp[idx] < threshold:
                continue
            expected.append(name)
        assert list(out.names) == expected


class TestEvaluate:
    def _models(self, small_pipeline):
        return (
            small_pipeline["classifier"],
            small_pipeline["regression"],
            small_pipeline["shape_model"],
            small_pipeline["test"],
        )

    def test_report_shape(self, small_pipeline):
        clf, reg, sm, test = self._models(small_pipeline)
        report = evaluate(clf, reg, sm, test)
        k = sm.k
        assert report.confusion.shape == (k, k)
        for i in range(k):
            row = report.confusion[i]
            if report.confusion_counts[i].sum():
                assert row.sum() == pytest.approx(1.0, abs=1e-9)
            else:
                assert row.sum() == 0.0
        # trace identity on counts
        assert report.confusion_counts.trace() / report.n_test == pytest.approx(report.accuracy)
        # occurrence buckets partition the test set
        assert sum(c for c, _ in report.accuracy_by_occurrence.values()) == report.n_test

    def test_perfect_classifier_identity_confusion(self, small_pipeline, monkeypatch):
        clf, reg, sm, test = self._models(small_pipeline)

        class Oracle:
            task = "classify"
            n_classes = sm.k
            schema_fingerprint = test.schema.fingerprint()
            feature_names = test.schema.names

        # fake an always-right classifier via a one-hot probability matrix
        import runvar.predictor as predictor_mod

        onehot = np.zeros((len(test), sm.k))
        onehot[np.arange(len(test)), test.y] = 1.0
        real = predictor_mod.predict_proba
        monkeypatch.setattr(
            predictor_mod,
            "predict_proba",
            lambda model, x: onehot if isinstance(model, Oracle) else real(model, x),
        )
        monkeypatch.setattr(
            predictor_mod,
            "gini_importance",
            lambda model: {n: 0.0 for n in test.schema.names},
        )
        report = evaluate(Oracle(), None, sm, test)
        assert report.accuracy == 1.0
        nonzero = report.confusion_counts.sum(axis=1) > 0
        assert np.array_equal(
            np.diag(report.confusion)[nonzero], np.ones(nonzero.sum())
        )

    def test_empty_test(self, small_pipeline):
        clf, reg, sm, test = self._models(small_pipeline)
        empty = dataclasses.replace(
            test, X=test.X[:0], y=test.y[:0], runtimes=test.runtimes[:0],
            hist_medians=test.hist_medians[:0], group_keys=[], instance_ids=[],
            submit_times=[],
        )
        with pytest.raises(EmptyTest):
            evaluate(clf, reg, sm, empty)

    def test_report_round_trip(self, small_pipeline):
        import json

        clf, reg, sm, test = self._models(small_pipeline)
        report = evaluate(clf, reg, sm, test)
        blob = json.dumps(report.to_dict(), sort_keys=True)
        assert json.loads(blob)["accuracy"] == report.accuracy
        assert report.to_text()


class TestDistributionComparison:
    def test_weighted_quantiles_match_numpy_for_equal_weights(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=500)
        w = np.full(500, 1 / 500)
        qs = np.arange(1, 100) / 100
        ours = weighted_quantiles(values, w, qs)
        ref = np.quantile(values, qs)
        assert np.allclose(ours, ref, atol=np.ptp(values) / 50)

    def test_ks_weighted_against_direct_cdf_oracle(self):
        rng = np.random.default_rng(4)
        sample = rng.normal(size=400)
        atoms = rng.normal(loc=0.5, size=300)
        weights = np.full(300, 1 / 300)
        ours = ks_distance_weighted(sample, atoms, weights)
        # direct oracle over a dense grid
        grid = np.linspace(-4, 5, 20_000)
        f1 = np.searchsorted(np.sort(sample), grid, side="right") / len(sample)
        f2 = np.searchsorted(np.sort(atoms), grid, side="right") / len(atoms)
        oracle = np.abs(f1 - f2).max()
        assert ours == pytest.approx(oracle, abs=1e-6)

    def test_constant_regression_ks_is_step_gap(self, small_pipeline):
        clf, reg, sm, test = self._models = (
            small_pipeline["classifier"],
            small_pipeline["regression"],
            small_pipeline["shape_model"],
            small_pipeline["test"],
        )
        # a regressor predicting the global mean: KS equals the maximal gap
        # between the actual CDF and a unit step at that mean
        mean = float(test.runtimes.mean())
        atoms = np.full(len(test), mean)
        w = np.full(len(test), 1 / len(test))
        ks = ks_distance_weighted(test.runtimes, atoms, w)
        srt = np.sort(test.runtimes)
        below = np.searchsorted(srt, mean, side="right") / len(srt)
        # step CDF is 0 left of the mean and 1 at/after it
        oracle = max(below, 1 - below)
        eps = 1 / len(srt)
        assert abs(ks - oracle) <= eps
