"""Evaluation metrics and report output.

Frame metrics (mean over frames, mean over class, Jaccard) work on
per-frame label sequences or segmentations; clip metrics (accuracy,
confusion) on per-clip label lists.  Labels may be ids or names, any
sortable hashable works.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Segmentation, frame_labels
from .errors import DataError
from .util import write_json

REPORT_FIELDS = ("metric", "split", "K", "value")


def _as_labels(x) -> np.ndarray:
    if isinstance(x, Segmentation):
        return np.asarray(frame_labels(x, x.num_frames))
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise DataError("per-frame labels must be a 1-D sequence")
    return arr


def _paired(gt, pred) -> tuple[np.ndarray, np.ndarray]:
    g, p = _as_labels(gt), _as_labels(pred)
    if len(g) != len(p):
        raise DataError(f"label lengths differ: {len(g)} vs {len(p)}")
    if len(g) == 0:
        raise DataError("cannot score zero frames")
    return g, p


def mof(gt, pred) -> float:
    """Fraction of frames whose predicted label matches the ground truth."""
    g, p = _paired(gt, pred)
    return float(np.mean(g == p))


def moc(gt, pred) -> float:
    """Unweighted mean of per-class frame recall over the classes present
    in the ground truth."""
    g, p = _paired(gt, pred)
    recalls = []
    for c in sorted(set(g.tolist())):
        sel = g == c
        recalls.append(float(np.mean(p[sel] == c)))
    return float(np.mean(recalls))


def jaccard(
    gt,
    pred,
    background=None,
    per_class: bool = True,
) -> float:
    """Jaccard index between two labelings of the same frames.

    Per class: intersection over union of the class's frame sets.  The
    default aggregates as the unweighted mean over classes present in the
    ground truth; per_class=False pools intersections and unions globally
    instead.  A label passed as background is dropped from the
    aggregation (pass None to keep every class).
    """
    g, p = _paired(gt, pred)
    classes = [c for c in sorted(set(g.tolist())) if c != background]
    if not classes:
        raise DataError("no foreground class present in the ground truth")
    inter_total = 0
    union_total = 0
    scores = []
    for c in classes:
        gi = g == c
        pi = p == c
        inter = int(np.sum(gi & pi))
        union = int(np.sum(gi | pi))
        inter_total += inter
        union_total += union
        scores.append(inter / union)
    if per_class:
        return float(np.mean(scores))
    return inter_total / union_total


@dataclass(eq=False)
class ConfusionMatrix:
    """Square count matrix, rows = ground truth, columns = prediction."""

    labels: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        L = len(self.labels)
        if counts.shape != (L, L):
            raise DataError(f"confusion counts shape {counts.shape} for {L} labels")
        if counts.min(initial=0) < 0:
            raise DataError("negative confusion count")
        self.labels = tuple(self.labels)
        self.counts = counts

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "counts": [[int(v) for v in row] for row in self.counts],
        }


def accuracy(gt_labels: Sequence, pred_labels: Sequence) -> tuple[float, ConfusionMatrix]:
    """Clip-level accuracy plus the confusion matrix over the union of
    observed labels (sorted)."""
    if len(gt_labels) != len(pred_labels):
        raise DataError(
            f"label lengths differ: {len(gt_labels)} vs {len(pred_labels)}"
        )
    if len(gt_labels) == 0:
        raise DataError("cannot score zero clips")
    labels = tuple(sorted(set(gt_labels) | set(pred_labels)))
    index = {lbl: i for i, lbl in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    hits = 0
    for g, p in zip(gt_labels, pred_labels):
        counts[index[g], index[p]] += 1
        hits += g == p
    return hits / len(gt_labels), ConfusionMatrix(labels=labels, counts=counts)


def conditional_mof(
    gt_clips: Sequence[Sequence],
    pred_clips: Sequence[Sequence],
    clip_correct: Sequence[bool],
) -> float:
    """Frame accuracy over only the clips marked correct (e.g. clips whose
    activity label was right); frames of the other clips are ignored."""
    if not (len(gt_clips) == len(pred_clips) == len(clip_correct)):
        raise DataError("clip lists and mask must have equal length")
    if len(clip_correct) == 0 or not any(clip_correct):
        raise DataError("no clip passes the mask")
    g_all, p_all = [], []
    for g, p, ok in zip(gt_clips, pred_clips, clip_correct):
        if not ok:
            continue
        g, p = _paired(g, p)
        g_all.append(g)
        p_all.append(p)
    return float(np.mean(np.concatenate(g_all) == np.concatenate(p_all)))


# ---------------------------------------------------------------------------
# reports


def report_row(metric: str, value: float, split: str = "", K=None) -> dict:
    return {
        "metric": metric,
        "split": split,
        "K": "" if K is None else K,
        "value": float(value),
    }


def write_report_csv(path, rows: Sequence[Mapping]) -> None:
    """One CSV row per metric value, fixed header metric,split,K,value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in REPORT_FIELDS})


def write_report_json(path, rows: Sequence[Mapping]) -> None:
    write_json(path, [dict(r) for r in rows])
