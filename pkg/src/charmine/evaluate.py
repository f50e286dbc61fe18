"""Detection scoring: greedy one-to-one IoU matching, P/R/F, PR curves.

A detection counts as positive when its IoU with an unclaimed ground-truth
box is at least the threshold (0.5 by default). Matching is greedy in
descending score order; equal scores keep input order.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import CharCandidate
from .geometry import BBox, boxes_to_array, iou_matrix
from .lines import TextLine

DEFAULT_IOU_MIN = 0.5
OPERATING_THRESHOLD = 0.05

# Published reference operating points, rendered in reports for comparison.
# Not desk-reproducible; never asserted against.
REFERENCE_CHAR_SCORES = {
    "baseline": {"recall": 84.80, "precision": 61.44, "fscore": 71.26},
    "semi_large": {"recall": 85.35, "precision": 66.74, "fscore": 74.91},
    "weak_large": {"recall": 85.45, "precision": 72.39, "fscore": 78.38},
}
REFERENCE_LINE_SCORES = {
    "baseline": {"recall": 80.7, "precision": 84.2, "fscore": 82.3},
    "semi_large": {"recall": 81.8, "precision": 86.9, "fscore": 84.2},
    "weak_large": {"recall": 83.1, "precision": 91.1, "fscore": 86.9},
}


@dataclass(frozen=True)
class Matching:
    """Per-detection TP flags (input order) and the unmatched-gt count."""

    tp_flags: tuple[bool, ...]
    matched_gt: tuple[int, ...]   # claimed gt index per detection, -1 for FP
    fn: int

    @property
    def tp(self) -> int:
        return sum(self.tp_flags)

    @property
    def fp(self) -> int:
        return len(self.tp_flags) - self.tp


@dataclass(frozen=True)
class EvalScores:
    precision: float
    recall: float
    fscore: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "fscore": self.fscore,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def match_detections(dets: Sequence[CharCandidate], gts: Sequence[BBox],
                     iou_min: float = DEFAULT_IOU_MIN) -> Matching:
    """Greedy one-to-one matching of detections against ground truth."""
    n = len(dets)
    tp_flags = [False] * n
    matched_gt = [-1] * n
    if n == 0:
        return Matching((), (), len(gts))
    order = sorted(range(n), key=lambda i: -dets[i].score)
    if len(gts) == 0:
        return Matching(tuple(tp_flags), tuple(matched_gt), 0)
    overlaps = iou_matrix(boxes_to_array([d.box for d in dets]), boxes_to_array(gts))
    claimed = [False] * len(gts)
    for i in order:
        best_j = -1
        best_iou = 0.0
        for j in range(len(gts)):
            if not claimed[j] and overlaps[i, j] > best_iou:
                best_iou = overlaps[i, j]
                best_j = j
        if best_j >= 0 and best_iou >= iou_min:
            claimed[best_j] = True
            tp_flags[i] = True
            matched_gt[i] = best_j
    return Matching(tuple(tp_flags), tuple(matched_gt), claimed.count(False))


def prf(matching: Matching) -> EvalScores:
    """Precision/recall/F from a matching; edge conventions documented below.

    Precision is 1.0 with no detections, recall 1.0 with no ground truth,
    and F is 0.0 when precision + recall is 0.
    """
    return prf_from_counts(matching.tp, matching.fp, matching.fn)


def prf_from_counts(tp: int, fp: int, fn: int) -> EvalScores:
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    fscore = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalScores(precision, recall, fscore, tp, fp, fn)


def pr_curve(dets_by_image: Mapping[str, Sequence[CharCandidate]],
             gts_by_image: Mapping[str, Sequence[BBox]],
             iou_min: float = DEFAULT_IOU_MIN) -> list[tuple[float, float]]:
    """One (recall, precision) point per distinct detection score, descending.

    Greedy matching in global score order makes the matching at any score
    threshold the prefix of the global matching, so cumulative counts over
    the globally ranked detections reproduce per-threshold evaluation.
    """
    n_gt = sum(len(g) for g in gts_by_image.values())
    ranked: list[tuple[float, bool]] = []
    for image_id, dets in dets_by_image.items():
        gts = gts_by_image.get(image_id, ())
        matching = match_detections(dets, gts, iou_min)
        for det, flag in zip(dets, matching.tp_flags):
            ranked.append((det.score, flag))
    ranked.sort(key=lambda t: -t[0])
    points = []
    tp = 0
    for k, (score, flag) in enumerate(ranked, start=1):
        tp += flag
        at_boundary = k == len(ranked) or ranked[k][0] < score
        if at_boundary:
            precision = tp / k
            recall = tp / n_gt if n_gt > 0 else 1.0
            points.append((recall, precision))
    return points


def write_pr_csv(points: Sequence[tuple[float, float]], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision"])
        writer.writerows(points)
    return path


def plot_pr_curve(points: Sequence[tuple[float, float]], path, title="PR curve") -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 4))
    if points:
        recalls, precisions = zip(*points)
        ax.plot(recalls, precisions, marker=".", lw=1)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def eval_chars(dets_by_image: Mapping[str, Sequence[CharCandidate]],
               gts_by_image: Mapping[str, Sequence[BBox]],
               iou_min: float = DEFAULT_IOU_MIN,
               operating_threshold: float = OPERATING_THRESHOLD) -> EvalScores:
    """Character-level scores at a fixed score gate, summed over images."""
    tp = fp = fn = 0
    for image_id, gts in gts_by_image.items():
        dets = [d for d in dets_by_image.get(image_id, ())
                if d.score > operating_threshold]
        matching = match_detections(dets, gts, iou_min)
        tp += matching.tp
        fp += matching.fp
        fn += matching.fn
    return prf_from_counts(tp, fp, fn)


def eval_lines(lines: Sequence[TextLine], gt_regions: Sequence[BBox],
               iou_min: float = DEFAULT_IOU_MIN) -> EvalScores:
    """Line-level scores for one image: lines ranked by line score."""
    as_dets = [CharCandidate(ln.box, min(1.0, max(0.0, ln.line_score))) for ln in lines]
    return prf(match_detections(as_dets, gt_regions, iou_min))


def eval_lines_by_image(lines_by_image: Mapping[str, Sequence[TextLine]],
                        gts_by_image: Mapping[str, Sequence[BBox]],
                        iou_min: float = DEFAULT_IOU_MIN) -> EvalScores:
    tp = fp = fn = 0
    for image_id, gts in gts_by_image.items():
        scores = eval_lines(lines_by_image.get(image_id, ()), list(gts), iou_min)
        tp += scores.tp
        fp += scores.fp
        fn += scores.fn
    return prf_from_counts(tp, fp, fn)


def write_report(path, *, dataset: str, model_checkpoint: str, level: str,
                 scores: EvalScores, operating_threshold: float | None = None,
                 extra: dict | None = None) -> Path:
    """Persist one evaluation report with the published comparison rows."""
    reference = REFERENCE_CHAR_SCORES if level == "char" else REFERENCE_LINE_SCORES
    report = {
        "dataset": dataset,
        "model_checkpoint": model_checkpoint,
        "level": level,
        "precision": scores.precision,
        "recall": scores.recall,
        "fscore": scores.fscore,
        "counts": {"tp": scores.tp, "fp": scores.fp, "fn": scores.fn},
        "operating_threshold": operating_threshold,
        "reference_percent": reference,
    }
    if extra:
        report.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
