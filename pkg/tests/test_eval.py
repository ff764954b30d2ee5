import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roledet.evaluation import (
    ThresholdPolicy,
    calibrate_threshold,
    confusion,
    ecdf,
    evaluate_predictions,
    make_predictions,
    stratified_kfold,
    tally,
    threshold_adjusted,
    topk_adjusted,
    weighted_metrics,
)


def predictions_from(probs, ids=None):
    probs = np.asarray(probs, dtype=np.float64)
    ids = ids or [f"s{i}" for i in range(len(probs))]
    return make_predictions(ids, probs)


def labelled(probs, labels):
    preds = predictions_from(probs)
    return preds, {p.sample_id: int(l) for p, l in zip(preds, labels)}


def realistic_predictions(rng, n=200, n_classes=5, signal=1.8):
    """Classifier-like prediction set: logits biased toward the true class."""
    true = rng.integers(0, n_classes, n)
    logits = rng.normal(size=(n, n_classes))
    logits[np.arange(n), true] += signal
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    return labelled(probs, true)


class TestStratifiedKfold:
    def test_exact_division(self):
        labels = np.repeat(np.arange(5), 10)
        folds = stratified_kfold(labels, 10, seed=0)
        for fold in folds:
            assert np.bincount(labels[fold], minlength=5).tolist() == [1] * 5

    def test_partition(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 4, 83)
        folds = stratified_kfold(labels, 5, seed=2)
        allidx = np.concatenate(folds)
        assert len(allidx) == 83
        assert len(np.unique(allidx)) == 83

    def test_uneven_class_chunking(self):
        labels = np.array([0] * 7 + [1] * 5)
        folds = stratified_kfold(labels, 3, seed=4)
        per_class = [np.bincount(labels[f], minlength=2).tolist() for f in folds]
        assert [c[0] for c in per_class] == [3, 2, 2]
        assert [c[1] for c in per_class] == [2, 2, 1]

    def test_small_class_warns(self):
        labels = np.array([0] * 10 + [1] * 2)
        with pytest.warns(UserWarning, match="smallest class"):
            folds = stratified_kfold(labels, 4, seed=0)
        assert sum(len(f) for f in folds) == 12

    def test_deterministic(self):
        labels = np.random.default_rng(5).integers(0, 3, 50)
        a = stratified_kfold(labels, 4, seed=9)
        b = stratified_kfold(labels, 4, seed=9)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_k_below_two_rejected(self):
        with pytest.raises(ValueError):
            stratified_kfold([0, 1], 1, seed=0)


class TestConfusionAndMetrics:
    def test_perfect_predictions(self):
        probs = np.eye(5)
        preds, labels = labelled(probs, range(5))
        matrix = confusion(preds, labels)
        np.testing.assert_array_equal(matrix, np.eye(5, dtype=int))
        m = weighted_metrics(matrix)
        assert m.accuracy == m.f1_weighted == 1.0

    def test_all_predicted_majority_matches_share(self):
        # heavily skewed class distribution: predicting the dominant class
        # everywhere scores exactly its share
        counts = [3574, 1354, 424, 24, 117126]
        true = np.repeat(np.arange(5), counts)
        pred = np.full(len(true), 4)
        m = weighted_metrics(tally(true, pred))
        assert m.accuracy == pytest.approx(117126 / 122502, abs=1e-9)
        assert m.accuracy == pytest.approx(0.95612, abs=5e-6)

    def test_matches_tally_oracle(self):
        rng = np.random.default_rng(3)
        preds, labels = realistic_predictions(rng)
        matrix = confusion(preds, labels)
        # independent per-class tallies
        for c_true in range(5):
            for c_pred in range(5):
                want = sum(
                    1
                    for p in preds
                    if labels[p.sample_id] == c_true and p.top1 == c_pred
                )
                assert matrix[c_true, c_pred] == want
        m = weighted_metrics(matrix)
        support = matrix.sum(axis=1)
        for c in range(5):
            tp = matrix[c, c]
            fp = matrix[:, c].sum() - tp
            fn = support[c] - tp
            prec = tp / (tp + fp) if tp + fp else 0.0
            rec = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            assert m.precision[c] == pytest.approx(prec, abs=1e-12)
            assert m.recall[c] == pytest.approx(rec, abs=1e-12)
            assert m.f1[c] == pytest.approx(f1, abs=1e-12)

    def test_id_mismatch_raises(self):
        preds = predictions_from(np.eye(5))
        with pytest.raises(ValueError, match="s4"):
            confusion(preds, {f"s{i}": 0 for i in range(4)})

    def test_zero_over_zero_is_zero(self):
        matrix = np.zeros((5, 5), dtype=int)
        matrix[0, 0] = 3
        m = weighted_metrics(matrix)
        assert m.precision[2] == 0.0 and m.recall[2] == 0.0 and m.f1[2] == 0.0


class TestTopkAdjusted:
    PROBS = [0.5, 0.3, 0.1, 0.06, 0.04]

    def test_true_in_top2(self):
        preds, labels = labelled([self.PROBS], [1])
        assert topk_adjusted(preds, labels, k=2).tolist() == [1]

    def test_true_is_top1(self):
        preds, labels = labelled([self.PROBS], [0])
        assert topk_adjusted(preds, labels, k=2).tolist() == [0]

    def test_true_outside_top2(self):
        preds, labels = labelled([self.PROBS], [2])
        assert topk_adjusted(preds, labels, k=2).tolist() == [0]

    def test_tie_ranks_lower_index_first(self):
        preds, labels = labelled([[0.4, 0.3, 0.3, 0.0, 0.0]], [2])
        # classes 1 and 2 tie at 0.3; rank order is (0, 1), so true=2 misses top-2
        assert topk_adjusted(preds, labels, k=2).tolist() == [0]

    def test_never_breaks_correct_prediction(self):
        rng = np.random.default_rng(11)
        preds, labels = realistic_predictions(rng)
        adjusted = topk_adjusted(preds, labels, k=2)
        for p, adj in zip(preds, adjusted):
            if p.top1 == labels[p.sample_id]:
                assert adj == p.top1


class TestCalibrateThreshold:
    def test_interpolated_example(self):
        # ties rank class 1 above class 2, so confidence 0.5 still counts
        probs = [[0.0, c, 1 - c, 0, 0] for c in (0.5, 0.6, 0.7, 0.8)]
        preds, labels = labelled(probs, [1, 1, 1, 1])
        tau = calibrate_threshold(preds, labels, ThresholdPolicy(1, 25.0))
        assert tau == pytest.approx(0.575, abs=1e-12)

    def test_constant_distribution(self):
        probs = [[0.3, 0.7, 0, 0, 0]] * 3
        preds, labels = labelled(probs, [1, 1, 1])
        tau = calibrate_threshold(preds, labels, ThresholdPolicy(1, 25.0))
        assert tau == pytest.approx(0.7)

    def test_only_correct_calibration_class_counts(self):
        probs = [[0.2, 0.8, 0, 0, 0], [0.9, 0.1, 0, 0, 0], [0.4, 0.6, 0, 0, 0]]
        preds, labels = labelled(probs, [1, 1, 0])  # second is a miss, third is class 0... not victim-correct
        tau = calibrate_threshold(preds, labels, ThresholdPolicy(1, 50.0))
        assert tau == pytest.approx(0.8)

    def test_no_correct_calibration_samples_raises(self):
        probs = [[0.9, 0.1, 0, 0, 0]]
        preds, labels = labelled(probs, [1])
        with pytest.raises(ValueError, match="calibration"):
            calibrate_threshold(preds, labels, ThresholdPolicy(1, 25.0))

    def test_monotone_in_percentile(self):
        rng = np.random.default_rng(2)
        preds, labels = realistic_predictions(rng)
        taus = [
            calibrate_threshold(preds, labels, ThresholdPolicy(1, pct))
            for pct in (5, 25, 50, 75, 95)
        ]
        assert all(a <= b + 1e-15 for a, b in zip(taus, taus[1:]))

    def test_matches_sorted_array_oracle(self):
        rng = np.random.default_rng(8)
        values = rng.uniform(0.55, 1.0, 37)
        probs = [[1 - v, v, 0, 0, 0] for v in values]
        preds, labels = labelled(probs, [1] * 37)
        tau = calibrate_threshold(preds, labels, ThresholdPolicy(1, 25.0))
        s = sorted(values)
        rank = 0.25 * (len(s) - 1)
        lo = math.floor(rank)
        oracle = s[lo] + (rank - lo) * (s[lo + 1] - s[lo])
        assert abs(tau - oracle) < 1e-12


class TestThresholdAdjusted:
    def test_below_tau_and_wrong_substitutes_second(self):
        preds, labels = labelled([[0.55, 0.35, 0.1, 0, 0]], [1])
        adjusted, rr = threshold_adjusted(preds, labels, 0.6)
        assert adjusted.tolist() == [1] and rr == 1.0

    def test_below_tau_but_correct_is_kept(self):
        preds, labels = labelled([[0.55, 0.35, 0.1, 0, 0]], [0])
        adjusted, rr = threshold_adjusted(preds, labels, 0.6)
        assert adjusted.tolist() == [0] and rr == 1.0

    def test_above_tau_kept_even_if_wrong(self):
        preds, labels = labelled([[0.7, 0.2, 0.1, 0, 0]], [1])
        adjusted, rr = threshold_adjusted(preds, labels, 0.6)
        assert adjusted.tolist() == [0] and rr == 0.0

    def test_tau_zero_is_identity(self):
        rng = np.random.default_rng(4)
        preds, labels = realistic_predictions(rng)
        adjusted, rr = threshold_adjusted(preds, labels, 0.0)
        assert rr == 0.0
        np.testing.assert_array_equal(adjusted, [p.top1 for p in preds])

    def test_rejection_rate_ignores_labels(self):
        rng = np.random.default_rng(6)
        preds, labels = realistic_predictions(rng)
        scrambled = {sid: (lbl + 2) % 5 for sid, lbl in labels.items()}
        _, rr1 = threshold_adjusted(preds, labels, 0.5)
        _, rr2 = threshold_adjusted(preds, scrambled, 0.5)
        assert rr1 == rr2


class TestEcdf:
    def test_three_values(self):
        points = ecdf([1, 2, 3])
        np.testing.assert_allclose(points, [[1, 1 / 3], [2, 2 / 3], [3, 1.0]])

    def test_constant(self):
        points = ecdf([4.2, 4.2, 4.2])
        np.testing.assert_allclose(points, [[4.2, 1.0]])

    def test_last_fraction_is_one(self):
        points = ecdf(np.random.default_rng(0).uniform(size=100))
        assert points[-1, 1] == 1.0

    def test_uniform_draws_within_dkw_band(self):
        rng = np.random.default_rng(123)
        points = ecdf(rng.uniform(size=1000))
        # DKW at 95%: eps = sqrt(ln(2/0.05)/(2n)) ~ 0.043 < 0.06
        deviation = np.abs(points[:, 1] - points[:, 0]).max()
        assert deviation < 0.06

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ecdf([])


class TestMonotonicityProperties:
    @given(st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_top2_dominates_top1(self, seed):
        rng = np.random.default_rng(seed)
        preds, labels = realistic_predictions(rng, n=80)
        true = np.array([labels[p.sample_id] for p in preds])
        base = weighted_metrics(tally(true, np.array([p.top1 for p in preds])))
        top2 = weighted_metrics(tally(true, topk_adjusted(preds, labels, 2)))
        assert top2.accuracy >= base.accuracy - 1e-12
        assert top2.f1_weighted >= base.f1_weighted - 1e-12
        assert (top2.precision >= base.precision - 1e-12).all()
        assert (top2.recall >= base.recall - 1e-12).all()

    @given(st.integers(0, 2**31), st.floats(0.0, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_weighted_recall_equals_accuracy(self, seed, tau):
        rng = np.random.default_rng(seed)
        preds, labels = realistic_predictions(rng, n=60)
        true = np.array([labels[p.sample_id] for p in preds])
        base = weighted_metrics(tally(true, np.array([p.top1 for p in preds])))
        assert base.recall_weighted == pytest.approx(base.accuracy, abs=1e-12)
        thr_labels, _ = threshold_adjusted(preds, labels, tau)
        thr = weighted_metrics(tally(true, thr_labels))
        assert thr.recall_weighted == pytest.approx(thr.accuracy, abs=1e-12)
        assert thr.accuracy >= base.accuracy - 1e-12


class TestEvaluatePredictions:
    def test_report_is_consistent(self):
        rng = np.random.default_rng(9)
        preds, labels = realistic_predictions(rng)
        tau = calibrate_threshold(preds, labels, ThresholdPolicy(1, 25.0))
        report = evaluate_predictions(preds, labels, tau)
        assert 0.0 <= report.rejection_rate <= 1.0
        assert report.tau == tau
        assert report.top2_f1_weighted >= report.f1_weighted
        assert report.thr_f1_weighted >= report.f1_weighted - 1e-12
        support_weighted = sum(c.f1 * c.support for c in report.per_class) / sum(
            c.support for c in report.per_class
        )
        assert report.f1_weighted == pytest.approx(support_weighted, abs=1e-12)
        payload = report.as_dict()
        assert payload["thresholded"]["note"].startswith("label-dependent")
