"""Segmentation accuracy: confusion matrix, per-class IoU, mean IoU.

Counts accumulate as 64-bit integers, so whole-dataset totals stay exact.
Pixels whose ground-truth value equals the ignore label contribute nothing.
Classes that appear in neither ground truth nor prediction have an undefined
IoU and are excluded from the mean (they score None, not 0); this matters
on small samples, so it is pinned by tests.
"""
from __future__ import annotations

import numpy as np

from .errors import DataError, MetricError, ShapeError


class ConfusionMatrix:
    """counts[g][p] = pixels with ground truth g predicted as p."""

    __slots__ = ("num_classes", "counts")

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {num_classes}")
        self.num_classes = int(num_classes)
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def copy(self) -> "ConfusionMatrix":
        out = ConfusionMatrix(self.num_classes)
        out.counts = self.counts.copy()
        return out

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ShapeError(
                f"cannot merge {other.num_classes}-class counts into "
                f"{self.num_classes}-class matrix")
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _first_offender(mask: np.ndarray) -> tuple:
    return tuple(int(v) for v in np.argwhere(mask)[0])


def accumulate(cm: ConfusionMatrix, gt, pred, ignore: int = 255) -> ConfusionMatrix:
    """Tally every non-ignored pixel into cm; returns cm.

    At non-ignored pixels, gt and pred values must lie in [0, K);
    out-of-range values are reported with their coordinates. Ignored pixels
    may hold anything on either side.
    """
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    if gt.shape != pred.shape:
        raise ShapeError(f"gt shape {gt.shape} != pred shape {pred.shape}")
    k = cm.num_classes
    keep = gt != ignore
    bad = keep & ((pred < 0) | (pred >= k))
    if np.any(bad):
        raise DataError(
            f"prediction {int(pred[_first_offender(bad)])} out of range "
            f"[0,{k}) at pixel {_first_offender(bad)}")
    bad = keep & ((gt < 0) | (gt >= k))
    if np.any(bad):
        raise DataError(
            f"ground truth {int(gt[_first_offender(bad)])} out of range "
            f"[0,{k}) at pixel {_first_offender(bad)}")
    flat = gt[keep].astype(np.int64) * k + pred[keep].astype(np.int64)
    cm.counts += np.bincount(flat, minlength=k * k).reshape(k, k)
    return cm


def iou_per_class(cm: ConfusionMatrix) -> list:
    """IoU[c] = counts[c][c] / (row_c + col_c - counts[c][c]); None when the
    class is absent from both gt and prediction."""
    diag = np.diag(cm.counts)
    union = cm.counts.sum(axis=1) + cm.counts.sum(axis=0) - diag
    out = []
    for c in range(cm.num_classes):
        out.append(float(diag[c]) / float(union[c]) if union[c] else None)
    return out


def mean_iou(cm: ConfusionMatrix) -> float:
    """Mean over present classes only."""
    present = [v for v in iou_per_class(cm) if v is not None]
    if not present:
        raise MetricError("mean IoU undefined: every class is absent")
    return sum(present) / len(present)
