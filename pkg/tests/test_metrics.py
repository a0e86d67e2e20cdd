"""Confusion-matrix accumulation and mean IoU against hand tallies and a
naive per-pixel oracle."""
import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dabnet.errors import DataError, MetricError, ShapeError
from dabnet.metrics import ConfusionMatrix, accumulate, iou_per_class, mean_iou


def naive_confusion(k, gt, pred, ignore):
    """Scalar reference: one pixel at a time."""
    m = np.zeros((k, k), np.int64)
    for g, p in zip(gt.ravel().tolist(), pred.ravel().tolist()):
        if g == ignore:
            continue
        m[g, p] += 1
    return m


class TestAccumulate:
    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=50)
    def test_matches_naive_tally(self, seed):
        rng = np.random.default_rng(seed)
        gt = rng.integers(0, 4, (7, 9)).astype(np.int64)
        gt[rng.random((7, 9)) < 0.2] = 255
        pred = rng.integers(0, 4, (7, 9)).astype(np.int64)
        cm = accumulate(ConfusionMatrix(4), gt, pred)
        assert np.array_equal(cm.counts, naive_confusion(4, gt, pred, 255))

    def test_ignore_label_is_configurable(self):
        gt = np.array([[0, 7], [1, 1]])
        pred = np.array([[0, 0], [1, 0]])
        cm = accumulate(ConfusionMatrix(2), gt, pred, ignore=7)
        assert cm.total == 3

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            accumulate(ConfusionMatrix(2), np.zeros((2, 2), np.int64),
                       np.zeros((2, 3), np.int64))

    def test_out_of_range_gt_names_offender(self):
        gt = np.array([[0, 5], [1, 0]])
        pred = np.zeros((2, 2), np.int64)
        with pytest.raises(DataError, match=r"\(0, 1\)"):
            accumulate(ConfusionMatrix(2), gt, pred)

    def test_out_of_range_pred_rejected(self):
        gt = np.zeros((2, 2), np.int64)
        pred = np.array([[0, 0], [-1, 0]])
        with pytest.raises(DataError):
            accumulate(ConfusionMatrix(2), gt, pred)

    def test_ignored_pixels_may_hold_any_value(self):
        # gt == ignore wins before either range check; a prediction of the
        # ignore label at such a pixel is legal too (pred == gt exactly)
        gt = np.array([[255, 0]])
        pred = np.array([[255, 1]])
        cm = accumulate(ConfusionMatrix(2), gt, pred)
        assert cm.total == 1


class TestIou:
    def test_hand_tally_two_class(self):
        cm = ConfusionMatrix(2)
        cm.counts[:] = [[3, 1], [1, 3]]
        # class 0: 3 / (3+1+1) = 0.6; symmetric for class 1
        assert iou_per_class(cm) == [0.6, 0.6]
        assert mean_iou(cm) == 0.6

    def test_perfect_prediction_is_exactly_one(self):
        cm = ConfusionMatrix(3)
        cm.counts[:] = np.diag([5, 9, 2])
        assert mean_iou(cm) == 1.0

    def test_absent_class_excluded_from_mean(self):
        cm = ConfusionMatrix(3)
        cm.counts[:2, :2] = [[4, 0], [0, 4]]
        per = iou_per_class(cm)
        assert per[2] is None
        assert mean_iou(cm) == 1.0

    def test_all_classes_absent_is_an_error(self):
        with pytest.raises(MetricError):
            mean_iou(ConfusionMatrix(3))

    def test_false_detection_of_absent_class_scores_zero(self):
        # class 2 never occurs in gt but is predicted once: union nonzero
        cm = ConfusionMatrix(3)
        cm.counts[0, 2] = 1
        cm.counts[1, 1] = 3
        per = iou_per_class(cm)
        assert per[2] == 0.0


class TestProperties:
    @given(sa=st.integers(0, 10**6), sb=st.integers(0, 10**6))
    @settings(max_examples=40)
    def test_accumulation_is_additive(self, sa, sb):
        ra, rb = np.random.default_rng(sa), np.random.default_rng(sb)
        gta = ra.integers(0, 3, (5, 5))
        preda = ra.integers(0, 3, (5, 5))
        gtb = rb.integers(0, 3, (5, 5))
        predb = rb.integers(0, 3, (5, 5))
        split = accumulate(accumulate(ConfusionMatrix(3), gta, preda),
                           gtb, predb)
        joint = accumulate(ConfusionMatrix(3),
                           np.concatenate([gta, gtb]),
                           np.concatenate([preda, predb]))
        assert np.array_equal(split.counts, joint.counts)

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=40)
    def test_swapping_gt_and_pred_transposes(self, seed):
        rng = np.random.default_rng(seed)
        gt = rng.integers(0, 3, (6, 6))
        pred = rng.integers(0, 3, (6, 6))
        a = accumulate(ConfusionMatrix(3), gt, pred, ignore=99)
        b = accumulate(ConfusionMatrix(3), pred, gt, ignore=99)
        assert np.array_equal(a.counts, b.counts.T)

    def test_merge_equals_elementwise_sum(self):
        a = ConfusionMatrix(2)
        a.counts[:] = [[1, 2], [3, 4]]
        b = ConfusionMatrix(2)
        b.counts[:] = [[10, 0], [0, 10]]
        merged = a.copy().merge(b)
        assert np.array_equal(merged.counts, a.counts + b.counts)
        assert np.array_equal(a.counts, [[1, 2], [3, 4]])  # merge copies
