"""Inference pipelines (classification and nearest-neighbour) and evaluation metrics.

Class-valued predictions become timestamps through the bin midpoint, which
minimizes expected absolute error when times are uniform inside a bin. All
time errors are circular.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import ModelParams, class_embedding_table, image_embed, time_embed
from .retrieval import GalleryIndex, query_embedding
from .timecore import (
    ClockTime,
    Dataset,
    MinuteLike,
    TimeLabelSpace,
    circular_diff,
    class_midpoint,
    class_of,
)

HOUR_HIT_MINUTES = 30.0


@dataclass(frozen=True)
class Prediction:
    """Ranked distinct classes (best first) and the top-1 midpoint timestamp."""

    classes: tuple
    timestamp: float

    def __post_init__(self) -> None:
        classes = tuple(int(c) for c in self.classes)
        if len(set(classes)) != len(classes):
            raise ValueError("ranked classes must be distinct")
        if not classes:
            raise ValueError("a prediction needs at least one class")
        object.__setattr__(self, "classes", classes)

    @property
    def top1(self) -> int:
        return self.classes[0]


@dataclass(frozen=True)
class EvalReport:
    top1: float
    top3: float
    top5: float
    time_mae_minutes: float
    confusion: np.ndarray
    hour_accuracy: float


def _ranked_order(scores: np.ndarray) -> np.ndarray:
    # descending score; stable sort leaves equal scores in ascending index order
    return np.argsort(-scores, kind="stable")


def classify(
    params: ModelParams, features: np.ndarray, space: TimeLabelSpace, k: int = 5
) -> Prediction:
    """Rank classes by cosine against the class table; ties go to the lower index."""
    c = space.total_classes
    if not 1 <= k <= c:
        raise ValueError(f"k={k} must be in [1, {c}]")
    table = class_embedding_table(params, space)
    scores = table @ image_embed(params, features)
    order = _ranked_order(scores)[:k]
    return Prediction(
        classes=tuple(int(i) for i in order),
        timestamp=class_midpoint(int(order[0]), space),
    )


def knn_predict(
    gallery: GalleryIndex,
    features: np.ndarray,
    params: ModelParams,
    k: int,
    space: Optional[TimeLabelSpace] = None,
    exclude_id: Optional[str] = None,
) -> Prediction:
    """Rank gallery neighbours by cosine, collapse duplicate classes first-seen.

    The timestamp is the class midpoint of the nearest neighbour's class. k
    counts distinct classes; the whole gallery is scanned so the ranking can
    reach k distinct classes whenever that many exist.
    """
    if space is None:
        space = TimeLabelSpace(24)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    items = query_embedding(
        gallery, image_embed(params, features), len(gallery), exclude_id=exclude_id
    )
    if not items:
        raise ValueError("empty gallery after self-exclusion")
    ranked: List[int] = []
    for item in items:
        cls = class_of(ClockTime(item.minute), space)
        if cls not in ranked:
            ranked.append(cls)
            if len(ranked) == k:
                break
    return Prediction(
        classes=tuple(ranked), timestamp=class_midpoint(ranked[0], space)
    )


def topk_accuracy(preds: Sequence[Prediction], labels: Sequence[int], k: int) -> float:
    """Fraction of samples whose label is among the first k ranked classes."""
    if len(preds) != len(labels):
        raise ValueError("predictions and labels differ in length")
    if not preds:
        raise ValueError("no samples")
    hits = sum(1 for p, y in zip(preds, labels) if int(y) in p.classes[:k])
    return hits / len(preds)


def time_mae(pred_times: Sequence[MinuteLike], gt_times: Sequence[MinuteLike]) -> float:
    """Mean circular distance in minutes between predictions and ground truth."""
    if len(pred_times) != len(gt_times) or len(pred_times) == 0:
        raise ValueError("need equal, non-empty time lists")
    return float(
        np.mean([circular_diff(p, g) for p, g in zip(pred_times, gt_times)])
    )


def confusion_matrix(
    pred_classes: Sequence[int], labels: Sequence[int], num_classes: int
) -> np.ndarray:
    """Count matrix with rows = ground truth, columns = prediction."""
    if len(pred_classes) != len(labels):
        raise ValueError("predictions and labels differ in length")
    m = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, g in zip(pred_classes, labels):
        if not (0 <= p < num_classes and 0 <= g < num_classes):
            raise ValueError(f"class pair ({g}, {p}) outside [0, {num_classes})")
        m[g, p] += 1
    return m


def hour_accuracy(
    pred_times: Sequence[MinuteLike], gt_times: Sequence[MinuteLike]
) -> float:
    """Fraction of predictions within 30 circular minutes of the truth."""
    if len(pred_times) != len(gt_times) or len(pred_times) == 0:
        raise ValueError("need equal, non-empty time lists")
    hits = sum(
        1
        for p, g in zip(pred_times, gt_times)
        if circular_diff(p, g) <= HOUR_HIT_MINUTES
    )
    return hits / len(pred_times)


def observational_error(gt_times: Sequence[ClockTime], space: TimeLabelSpace) -> float:
    """Mean distance between true times and their own class midpoints.

    This is the floor any class-valued predictor pays for quantizing the day
    into C bins.
    """
    if not gt_times:
        raise ValueError("no samples")
    return float(
        np.mean(
            [
                circular_diff(t, class_midpoint(class_of(t, space), space))
                for t in gt_times
            ]
        )
    )


def class_affinity(
    params: ModelParams, external: np.ndarray, space: TimeLabelSpace
) -> np.ndarray:
    """Softmax over dot products of an external K-dim embedding with the class table."""
    v = np.asarray(external, dtype=np.float64)
    if v.shape != (params.embed_dim,):
        raise ValueError(f"external embedding must have shape ({params.embed_dim},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite external embedding")
    scores = class_embedding_table(params, space) @ v
    scores -= np.max(scores)
    e = np.exp(scores)
    return e / np.sum(e)


def intra_video_variance(frame_embeddings: np.ndarray) -> float:
    """Population variance per dimension across frames, averaged over dimensions."""
    f = np.atleast_2d(np.asarray(frame_embeddings, dtype=np.float64))
    if f.shape[0] < 1:
        raise ValueError("no frames")
    return float(np.mean(np.var(f, axis=0)))


def time_guidance_loss(
    params: ModelParams,
    features: np.ndarray,
    target_class: int,
    space: TimeLabelSpace,
) -> float:
    """Cosine distance 1 - cos between the adapted feature and a target class.

    Differentiable in principle through the adaptor; exposed so an external
    generative pipeline can steer an image toward a clock time.
    """
    if not 0 <= target_class < space.total_classes:
        raise ValueError(f"target class {target_class} outside [0, {space.total_classes})")
    i_vec = image_embed(params, features)
    t_vec = time_embed(params, int(target_class))
    return float(1.0 - np.dot(i_vec, t_vec))


def evaluate_classification(
    params: ModelParams,
    dataset: Dataset,
    space: TimeLabelSpace,
    max_k: int = 5,
) -> EvalReport:
    """Classification report over a dataset: top-1/3/5, MAE, confusion, hour accuracy."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    k = min(max(max_k, 5), space.total_classes)
    preds = [classify(params, r.features, space, k=k) for r in dataset.records]
    labels = [class_of(r.time, space) for r in dataset.records]
    gts = [r.time for r in dataset.records]
    pred_times = [p.timestamp for p in preds]
    return EvalReport(
        top1=topk_accuracy(preds, labels, 1),
        top3=topk_accuracy(preds, labels, min(3, k)),
        top5=topk_accuracy(preds, labels, min(5, k)),
        time_mae_minutes=time_mae(pred_times, gts),
        confusion=confusion_matrix([p.top1 for p in preds], labels, space.total_classes),
        hour_accuracy=hour_accuracy(pred_times, gts),
    )


def evaluate_knn(
    params: ModelParams,
    gallery: GalleryIndex,
    dataset: Dataset,
    space: TimeLabelSpace,
    max_k: int = 5,
    exclude_self: bool = False,
) -> EvalReport:
    """Nearest-neighbour report: same metrics as classification, kNN inference."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    k = min(max(max_k, 5), space.total_classes)
    preds = [
        knn_predict(
            gallery,
            r.features,
            params,
            k=k,
            space=space,
            exclude_id=r.id if exclude_self else None,
        )
        for r in dataset.records
    ]
    labels = [class_of(r.time, space) for r in dataset.records]
    gts = [r.time for r in dataset.records]
    pred_times = [p.timestamp for p in preds]
    return EvalReport(
        top1=topk_accuracy(preds, labels, 1),
        top3=topk_accuracy(preds, labels, min(3, k)),
        top5=topk_accuracy(preds, labels, min(5, k)),
        time_mae_minutes=time_mae(pred_times, gts),
        confusion=confusion_matrix([p.top1 for p in preds], labels, space.total_classes),
        hour_accuracy=hour_accuracy(pred_times, gts),
    )


def write_eval_report_csv(report: EvalReport, path) -> None:
    """One-row delimited summary with a stable column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["top1", "top3", "top5", "time_mae_minutes", "hour_accuracy"])
        writer.writerow(
            [
                f"{report.top1:.6f}",
                f"{report.top3:.6f}",
                f"{report.top5:.6f}",
                f"{report.time_mae_minutes:.4f}",
                f"{report.hour_accuracy:.6f}",
            ]
        )


def write_confusion_csv(matrix: np.ndarray, path) -> None:
    """Integer count matrix with a header of predicted-class indices."""
    m = np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gt\\pred"] + [str(i) for i in range(m.shape[1])])
        for g in range(m.shape[0]):
            writer.writerow([str(g)] + [str(int(v)) for v in m[g]])
