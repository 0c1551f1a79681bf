"""Scoring: P/R/F1 for labeling, ROC AUC, localization Acc/AFP.

AUC uses the rank-statistic form with midrank tie handling. Localization
matches detections to ground-truth boxes greedily, one-to-one, by
descending overlap; accuracy is per-ground-truth-box recall and AFP
normalizes unmatched detections by the evaluation image count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from cxrlabel.errors import (
    DegenerateLabels,
    IdSetMismatch,
    MalformedRow,
)
from cxrlabel.labeling import LabelConfig, ReportLabels, Status
from cxrlabel.localization import BBox, OVERLAP_MEASURES

# Threshold grids swept by the localization evaluation.
T_GRID_IOBB = (0.1, 0.25, 0.5, 0.75, 0.9)
T_GRID_IOU = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)

NORMAL_ROW = "Normal"
TOTAL_ROW = "Total"


@dataclass(frozen=True)
class ClassScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "ClassScore") -> "ClassScore":
        return ClassScore(self.tp + other.tp, self.fp + other.fp,
                          self.fn + other.fn)


@dataclass(frozen=True)
class PRF1Result:
    scores: dict[str, ClassScore]  # per class, plus the Normal pseudo-class
    total: ClassScore  # micro-average: summed counts

    def rows(self) -> list[tuple[str, ClassScore]]:
        return list(self.scores.items()) + [(TOTAL_ROW, self.total)]


def prf1(
    predicted: Iterable[ReportLabels],
    gold: Iterable[ReportLabels],
    config: LabelConfig,
) -> PRF1Result:
    """Per-class precision/recall/F1 against gold labels.

    The report status contributes a Normal pseudo-class; the Total row
    micro-averages all rows by summing their counts.
    """
    pred_by_id = {r.report_id: r for r in predicted}
    gold_by_id = {r.report_id: r for r in gold}
    if set(pred_by_id) != set(gold_by_id):
        missing = set(gold_by_id) ^ set(pred_by_id)
        raise IdSetMismatch(f"report id sets differ on {sorted(missing)[:5]}")

    scores: dict[str, ClassScore] = {}
    for index, cls in enumerate(config.classes):
        tp = fp = fn = 0
        for report_id, pred in pred_by_id.items():
            p = pred.y[index]
            g = gold_by_id[report_id].y[index]
            tp += p and g
            fp += p and not g
            fn += g and not p
        scores[cls] = ClassScore(tp, fp, fn)

    tp = fp = fn = 0
    for report_id, pred in pred_by_id.items():
        p = pred.status is Status.NORMAL
        g = gold_by_id[report_id].status is Status.NORMAL
        tp += p and g
        fp += p and not g
        fn += g and not p
    scores[NORMAL_ROW] = ClassScore(tp, fp, fn)

    total = ClassScore(0, 0, 0)
    for score in scores.values():
        total = total + score
    return PRF1Result(scores, total)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    sorted_values = values[order]
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_values[j + 1] == sorted_values[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative,
    counting ties as one half; computed from midranks."""
    score_arr = np.asarray(scores, dtype=float).ravel()
    label_arr = np.asarray(labels).ravel()
    if score_arr.shape != label_arr.shape:
        raise MalformedRow("scores and labels differ in length")
    if not np.all((label_arr == 0) | (label_arr == 1)):
        raise MalformedRow("labels must be 0/1")
    n_pos = int(np.sum(label_arr == 1))
    n_neg = int(np.sum(label_arr == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both labels, got {n_pos} pos / {n_neg} neg")
    ranks = _midranks(score_arr)
    pos_rank_sum = float(np.sum(ranks[label_arr == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """(FPR, TPR) points at every distinct score threshold, descending."""
    score_arr = np.asarray(scores, dtype=float).ravel()
    label_arr = np.asarray(labels).ravel()
    n_pos = int(np.sum(label_arr == 1))
    n_neg = int(np.sum(label_arr == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both labels, got {n_pos} pos / {n_neg} neg")
    points = [(0.0, 0.0)]
    for threshold in sorted(set(score_arr), reverse=True):
        hit = score_arr >= threshold
        tpr = float(np.sum(hit & (label_arr == 1))) / n_pos
        fpr = float(np.sum(hit & (label_arr == 0))) / n_neg
        points.append((fpr, tpr))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


@dataclass(frozen=True)
class LocEvalResult:
    mode: str
    threshold: float
    acc: dict[str, float]  # absent for classes with no ground truth
    afp: dict[str, float]
    matched: dict[str, int]
    total_gt: dict[str, int]
    unmatched_det: dict[str, int]
    n_images: int


def _greedy_match(
    gts: list[BBox], dets: list[BBox], threshold: float, measure
) -> tuple[int, int]:
    """Returns (matched gt count, unmatched det count) for one image/class."""
    if not gts:
        return 0, len(dets)
    overlap = [[measure(gt, det) for gt in gts] for det in dets]
    det_order = sorted(
        range(len(dets)), key=lambda d: (-max(overlap[d]), d)
    )
    free = set(range(len(gts)))
    matched = 0
    unmatched = 0
    for d in det_order:
        best_gt = None
        best_val = threshold
        for g in sorted(free):
            if overlap[d][g] > best_val:
                best_val = overlap[d][g]
                best_gt = g
        if best_gt is None:
            unmatched += 1
        else:
            free.remove(best_gt)
            matched += 1
    return matched, unmatched


def localization_eval(
    detections: Iterable[BBox],
    gts: Iterable[BBox],
    threshold: float,
    mode: str,
    n_images: Optional[int] = None,
) -> LocEvalResult:
    """Greedy one-to-one matching at overlap > threshold.

    Acc_class = matched GT / total GT; AFP_class = unmatched detections
    divided by the evaluation image count (the distinct image ids across
    both inputs unless given explicitly).
    """
    if mode not in OVERLAP_MEASURES:
        raise MalformedRow(f"unknown overlap mode {mode!r}")
    if not 0 < threshold < 1:
        raise MalformedRow(f"threshold {threshold} outside (0,1)")
    measure = OVERLAP_MEASURES[mode]
    detections = list(detections)
    gts = list(gts)
    images = {b.image_id for b in detections} | {b.image_id for b in gts}
    if n_images is None:
        n_images = len(images)
    classes = sorted({b.label for b in detections} | {b.label for b in gts})

    matched: dict[str, int] = {c: 0 for c in classes}
    total_gt: dict[str, int] = {c: 0 for c in classes}
    unmatched_det: dict[str, int] = {c: 0 for c in classes}
    for cls in classes:
        for image in sorted(images):
            image_gts = [b for b in gts if b.label == cls and b.image_id == image]
            image_dets = [
                b for b in detections if b.label == cls and b.image_id == image
            ]
            hit, miss = _greedy_match(image_gts, image_dets, threshold, measure)
            matched[cls] += hit
            total_gt[cls] += len(image_gts)
            unmatched_det[cls] += miss

    acc = {
        c: matched[c] / total_gt[c] for c in classes if total_gt[c] > 0
    }
    afp = {
        c: (unmatched_det[c] / n_images if n_images else 0.0) for c in classes
    }
    return LocEvalResult(
        mode, threshold, acc, afp, matched, total_gt, unmatched_det, n_images
    )


def localization_sweep(
    detections: Iterable[BBox],
    gts: Iterable[BBox],
    mode: str,
    grid: Optional[Iterable[float]] = None,
    n_images: Optional[int] = None,
) -> list[LocEvalResult]:
    if grid is None:
        grid = T_GRID_IOBB if mode == "iobb" else T_GRID_IOU
    detections = list(detections)
    gts = list(gts)
    return [
        localization_eval(detections, gts, t, mode, n_images) for t in grid
    ]
