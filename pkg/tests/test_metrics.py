"""Metrics vs. spec examples and the exhaustive oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import eer_oracle, interval_f1_oracle
from proctorlab.metrics import (
    MetricError,
    ScoreSet,
    compute_eer,
    constant_baseline,
    det_points,
    interval_f1,
    interval_iou,
    mae,
)


class TestEER:
    def test_perfect_separation(self):
        eer, _t = compute_eer(ScoreSet((0.9, 0.8), (0.1, 0.2)))
        assert eer == 0.0

    def test_interleaved_third(self):
        eer, threshold = compute_eer(ScoreSet((0.4, 0.6, 0.8),
                                              (0.3, 0.5, 0.7)))
        assert eer == pytest.approx(1 / 3, abs=1e-9)
        assert threshold == pytest.approx(0.55, abs=1e-9)

    def test_identical_distributions_give_half(self):
        scores = ScoreSet((0.2, 0.5, 0.9), (0.2, 0.5, 0.9))
        eer, _t = compute_eer(scores)
        assert eer == pytest.approx(0.5, abs=1e-12)

    def test_empty_side_rejected(self):
        with pytest.raises(MetricError):
            compute_eer(ScoreSet((), (0.1,)))

    def test_lower_is_genuine_orientation(self):
        flipped = ScoreSet((0.1, 0.2), (0.8, 0.9), higher_is_genuine=False)
        eer, _t = compute_eer(flipped)
        assert eer == 0.0

    @given(gen=st.lists(st.integers(-5000, 5000), min_size=1, max_size=30),
           imp=st.lists(st.integers(-5000, 5000), min_size=1, max_size=30))
    @settings(max_examples=60)
    def test_monotone_transform_invariance(self, gen, imp):
        # scores on a millistep grid so the transform cannot collapse
        # distinct values into one float
        gen = [v / 1000.0 for v in gen]
        imp = [v / 1000.0 for v in imp]
        eer1, _ = compute_eer(ScoreSet(tuple(gen), tuple(imp)))
        transform = lambda s: math.atan(s) * 3 + 1  # strictly increasing
        eer2, _ = compute_eer(ScoreSet(tuple(map(transform, gen)),
                                       tuple(map(transform, imp))))
        assert eer2 == pytest.approx(eer1, abs=1e-12)

    @given(st.data())
    @settings(max_examples=60)
    def test_eer_within_half_under_stochastic_dominance(self, data):
        # lift the impostor order statistics by non-negative amounts: the
        # genuine empirical distribution then dominates the impostor one,
        # which is the precondition for EER <= 1/2
        imp = data.draw(st.lists(st.floats(-3, 3), min_size=1, max_size=40))
        lift = data.draw(st.lists(st.floats(0, 4), min_size=len(imp),
                                  max_size=len(imp)))
        gen = [b + u for b, u in zip(sorted(imp), lift)]
        eer, _ = compute_eer(ScoreSet(tuple(gen), tuple(imp)))
        assert -1e-12 <= eer <= 0.5 + 1e-9

    def test_matches_oracle_on_random_sets(self):
        rng = np.random.default_rng(12)
        for trial in range(200):
            n_g = int(rng.integers(1, 60))
            n_i = int(rng.integers(1, 60))
            sep = rng.uniform(0.0, 2.0)
            gen = tuple(rng.normal(sep, 1.0, n_g).round(3).tolist())
            imp = tuple(rng.normal(0.0, 1.0, n_i).round(3).tolist())
            got_eer, got_t = compute_eer(ScoreSet(gen, imp))
            want_eer, want_t = eer_oracle(gen, imp)
            assert got_eer == want_eer, f"trial {trial}"
            assert got_t == want_t, f"trial {trial}"

    def test_det_points_cover_both_extremes(self):
        pts = det_points(ScoreSet((0.8, 0.9), (0.1, 0.2)))
        fars = [p[1] for p in pts]
        frrs = [p[2] for p in pts]
        assert fars[0] == 1.0 and frrs[0] == 0.0
        assert fars[-1] == 0.0 and frrs[-1] == 1.0


class TestIntervalF1:
    def test_exact_match(self):
        res = interval_f1([(10, 20)], [(10, 20)])
        assert res.f1 == 1.0 and res.n_matched == 1

    def test_empty_pred_nonempty_truth(self):
        res = interval_f1([], [(5, 9)])
        assert res.recall == 0.0
        assert res.f1 == 0.0

    def test_iou_threshold_admits_partial_overlap(self):
        assert interval_iou((10, 20), (14, 24)) == pytest.approx(6 / 14)
        res = interval_f1([(10, 20)], [(14, 24)], iou_min=0.3)
        assert res.f1 == 1.0

    def test_below_threshold_no_match(self):
        res = interval_f1([(10, 20)], [(19, 40)], iou_min=0.3)
        assert res.n_matched == 0

    def test_one_to_one_matching(self):
        res = interval_f1([(0, 10), (1, 11)], [(0, 10)])
        assert res.n_matched == 1
        assert res.precision == 0.5
        assert res.recall == 1.0

    def _random_intervals(self, rng, n):
        out = []
        for _ in range(n):
            start = rng.uniform(0, 100)
            out.append((start, start + rng.uniform(0.5, 30)))
        return out

    def test_symmetry_swaps_precision_and_recall(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = self._random_intervals(rng, int(rng.integers(0, 8)))
            b = self._random_intervals(rng, int(rng.integers(0, 8)))
            fwd = interval_f1(a, b)
            rev = interval_f1(b, a)
            assert fwd.precision == rev.recall
            assert fwd.recall == rev.precision
            assert fwd.f1 == rev.f1

    def test_matches_brute_force_on_random_sets(self):
        rng = np.random.default_rng(31)
        for trial in range(200):
            pred = self._random_intervals(rng, int(rng.integers(0, 12)))
            truth = self._random_intervals(rng, int(rng.integers(0, 12)))
            iou_min = float(rng.choice([0.1, 0.3, 0.5]))
            got = interval_f1(pred, truth, iou_min)
            want = interval_f1_oracle(pred, truth, iou_min)
            assert (got.precision, got.recall, got.f1, got.n_matched) == want, \
                f"trial {trial}"


class TestMAE:
    def test_identity_is_zero(self):
        assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_single_pair(self):
        assert mae([70.0], [75.0]) == 5.0

    def test_symmetric_errors_average(self):
        assert mae([0.0, 10.0], [10.0, 0.0]) == 10.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricError, match="length mismatch"):
            mae([1.0], [1.0, 2.0])


class TestConstantBaseline:
    def test_predicts_training_mean(self):
        predict = constant_baseline([50.0, 70.0])
        assert predict(None) == 60.0
        assert predict("anything") == 60.0

    def test_single_target(self):
        assert constant_baseline([80.0])(None) == 80.0

    def test_empty_training_set_rejected(self):
        with pytest.raises(MetricError):
            constant_baseline([])

    def test_training_mae_equals_mean_absolute_deviation(self):
        rng = np.random.default_rng(9)
        targets = rng.uniform(0, 100, 40).tolist()
        predict = constant_baseline(targets)
        preds = [predict(None)] * len(targets)
        mad = float(np.mean(np.abs(np.asarray(targets)
                                   - np.mean(targets))))
        assert mae(preds, targets) == pytest.approx(mad, rel=1e-12)
