"""Segmentation quality measures against a ground-truth mask.

Undefined values (e.g. relative area difference with an empty ground
truth) are reported as NaN rather than raised.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ShapeError

LOG_LOSS_CLAMP = 1e-15

METRIC_NAMES = ("dice", "jaccard", "rand", "ravd", "roc_auc", "mse", "log", "obj_tpr")


@dataclass(frozen=True)
class MetricReport:
    dice: float
    jaccard: float
    rand: float
    ravd: float
    roc_auc: float
    mse: float
    log: float
    obj_tpr: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _as_bool_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    return pred, gt


def dice(pred: np.ndarray, gt: np.ndarray) -> float:
    """Overlap coefficient 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""

    pred, gt = _as_bool_pair(pred, gt)
    total = int(pred.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((pred & gt).sum()) / total


def jaccard(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""

    pred, gt = _as_bool_pair(pred, gt)
    union = int((pred | gt).sum())
    if union == 0:
        return 1.0
    return int((pred & gt).sum()) / union


def _choose2(n: int) -> int:
    return n * (n - 1) // 2


def rand_index(pred: np.ndarray, gt: np.ndarray) -> float:
    """Pairwise agreement of the two-class partitions; 1.0 for fewer than 2 cells."""

    pred, gt = _as_bool_pair(pred, gt)
    n = pred.size
    if n < 2:
        return 1.0
    n11 = int((pred & gt).sum())
    n10 = int((pred & ~gt).sum())
    n01 = int((~pred & gt).sum())
    n00 = n - n11 - n10 - n01
    same_same = sum(_choose2(c) for c in (n11, n10, n01, n00))
    pred_pairs = _choose2(n11 + n10) + _choose2(n01 + n00)
    gt_pairs = _choose2(n11 + n01) + _choose2(n10 + n00)
    total = _choose2(n)
    return (total + 2 * same_same - pred_pairs - gt_pairs) / total


def ravd(pred: np.ndarray, gt: np.ndarray) -> float:
    """Relative absolute area difference ||A|-|B|| / |B|; NaN for empty ground truth."""

    pred, gt = _as_bool_pair(pred, gt)
    gt_area = int(gt.sum())
    if gt_area == 0:
        return float("nan")
    return abs(int(pred.sum()) - gt_area) / gt_area


def obj_tpr(pred: np.ndarray, gt: np.ndarray) -> float:
    """Object true-positive rate |A∩B| / |B|; NaN for empty ground truth."""

    pred, gt = _as_bool_pair(pred, gt)
    gt_area = int(gt.sum())
    if gt_area == 0:
        return float("nan")
    return int((pred & gt).sum()) / gt_area


def mse(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean squared error between the binary masks (= fraction of differing cells)."""

    pred, gt = _as_bool_pair(pred, gt)
    return float((pred ^ gt).mean())


def foreground_scores(mask: np.ndarray, strengths: np.ndarray) -> np.ndarray:
    """Per-cell foreground score: strength on predicted foreground, else 1 - strength."""

    mask = np.asarray(mask).astype(bool)
    strengths = np.asarray(strengths, dtype=np.float64)
    if mask.shape != strengths.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match strengths {strengths.shape}")
    return np.where(mask, strengths, 1.0 - strengths)


def roc_auc(scores: np.ndarray, gt: np.ndarray) -> float:
    """Rank-based AUC with midrank tie handling; NaN if either class is missing."""

    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(gt).astype(bool).ravel()
    if scores.shape != labels.shape:
        raise ShapeError("scores and ground truth sizes differ")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(labels.size, dtype=np.float64)
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[labels].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def log_loss(scores: np.ndarray, gt: np.ndarray) -> float:
    """Mean negative log-likelihood of the ground truth under clamped scores."""

    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(gt).astype(bool).ravel()
    if scores.shape != labels.shape:
        raise ShapeError("scores and ground truth sizes differ")
    p = np.clip(scores, LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP)
    return float(-np.mean(np.where(labels, np.log(p), np.log1p(-p))))


def metric_report(pred: np.ndarray, strengths: np.ndarray | None, gt: np.ndarray) -> MetricReport:
    """All eight metrics for one prediction.

    ``strengths`` feeds the soft scores behind roc_auc and log loss; without
    it the binary mask is used as a 0/1 score map.
    """

    pred_b, gt_b = _as_bool_pair(pred, gt)
    if strengths is None:
        scores = pred_b.astype(np.float64)
    else:
        scores = foreground_scores(pred_b, strengths)
    return MetricReport(
        dice=dice(pred_b, gt_b),
        jaccard=jaccard(pred_b, gt_b),
        rand=rand_index(pred_b, gt_b),
        ravd=ravd(pred_b, gt_b),
        roc_auc=roc_auc(scores, gt_b),
        mse=mse(pred_b, gt_b),
        log=log_loss(scores, gt_b),
        obj_tpr=obj_tpr(pred_b, gt_b),
    )
