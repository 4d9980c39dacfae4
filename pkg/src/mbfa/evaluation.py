"""Metrics, confusion matrices, repeat statistics, and timing.

The headline metric is mean per-class top-1 accuracy: each class's own
accuracy is computed first and the unweighted average over classes is
reported, so small classes count as much as large ones.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .data import ZslDataset, instance_indices
from .embedding import DEFAULT_MCCA_REG
from .matrix import symmetric_eig
from .pipeline import FusionWeights, predict, train


@dataclass(frozen=True)
class TimingRecord:
    fit_seconds: float
    infer_ms_per_image: float


@dataclass(frozen=True)
class EvaluationReport:
    """Per-class accuracy summary over one prediction run.

    confusion rows are true classes, columns predicted, both in class_ids
    order.  std_over_repeats is only set when the caller aggregated several
    runs; timing is only set by the benchmark path.
    """

    class_ids: tuple[int, ...]
    confusion: np.ndarray
    per_class_accuracy: np.ndarray
    mean_per_class_top1: float
    std_over_repeats: float | None = None
    timing: TimingRecord | None = None


def evaluate(predicted, true_labels, class_order) -> EvaluationReport:
    """Build the confusion matrix and per-class accuracies.

    predicted and true_labels are aligned class-id sequences; class_order
    fixes the row/column order and must cover every label that occurs.
    """
    class_order = tuple(int(c) for c in class_order)
    pos = {c: i for i, c in enumerate(class_order)}
    predicted = [int(getattr(p, "class_id", p)) for p in predicted]
    true_labels = [int(t) for t in true_labels]
    if len(predicted) != len(true_labels):
        raise ValueError(
            f"{len(predicted)} predictions for {len(true_labels)} labels"
        )
    n = len(class_order)
    confusion = np.zeros((n, n), dtype=np.int64)
    for pred, true in zip(predicted, true_labels):
        if true not in pos:
            raise ValueError(f"true label {true} outside the evaluated class set")
        if pred not in pos:
            raise ValueError(f"predicted label {pred} outside the evaluated class set")
        confusion[pos[true], pos[pred]] += 1
    row_sums = confusion.sum(axis=1)
    if np.any(row_sums == 0):
        empty = [class_order[i] for i in np.flatnonzero(row_sums == 0)]
        raise ValueError(f"classes without test instances: {empty}")
    per_class = confusion.diagonal() / row_sums
    return EvaluationReport(
        class_ids=class_order,
        confusion=confusion,
        per_class_accuracy=per_class,
        mean_per_class_top1=float(per_class.mean()),
    )


def aggregate_repeats(values) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation; std is 0 for one value."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("need at least one value")
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std


def benchmark(
    dataset: ZslDataset,
    selection=None,
    d: int = 2,
    weights: FusionWeights | None = None,
    repeats: int = 1,
    method: str = "MBFA",
    reg: float = DEFAULT_MCCA_REG,
) -> TimingRecord:
    """Wall-clock fit time and mean per-image inference time.

    Times are averaged over repeats on a monotonic clock.  A throwaway
    3x3 eigensolve runs first so compiled-kernel warmup stays out of the
    measurement.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    symmetric_eig(np.eye(3), 1)

    fit_times = []
    model = prototypes = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        model, prototypes = train(dataset, selection, d, method=method, reg=reg)
        fit_times.append(time.perf_counter() - t0)

    if weights is None:
        weights = FusionWeights.uniform(len(prototypes.tables))
    idx = instance_indices(dataset, "unseen")
    x_test = dataset.features[:, idx]
    infer_times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        predict(model, x_test, prototypes, weights)
        infer_times.append(time.perf_counter() - t0)

    return TimingRecord(
        fit_seconds=float(np.mean(fit_times)),
        infer_ms_per_image=float(np.mean(infer_times)) * 1000.0 / idx.size,
    )


def report_to_dict(report: EvaluationReport, class_names=None) -> dict:
    doc = {
        "class_ids": list(report.class_ids),
        "confusion": report.confusion.tolist(),
        "per_class_accuracy": report.per_class_accuracy.tolist(),
        "mean_per_class_top1": report.mean_per_class_top1,
    }
    if class_names is not None:
        doc["class_names"] = [class_names[c] for c in report.class_ids]
    if report.std_over_repeats is not None:
        doc["std_over_repeats"] = report.std_over_repeats
    if report.timing is not None:
        doc["timing"] = {
            "fit_seconds": report.timing.fit_seconds,
            "infer_ms_per_image": report.timing.infer_ms_per_image,
        }
    return doc


def save_confusion_csv(path, report: EvaluationReport, class_names) -> None:
    """Confusion matrix as CSV with class-name header row and column."""
    names = [class_names[c] for c in report.class_ids]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\predicted"] + names)
        for name, row in zip(names, report.confusion):
            writer.writerow([name] + [int(v) for v in row])
