"""Evaluation metrics (AUROC, AP, ACC) with missing-target masking, and the
random-output predicate used as the escalation stopping rule.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvaluationError,
    MetricUndefinedError,
    ParameterError,
)
from .graphs import MISSING_TARGET, Dataset
from .models import ModelParams, forward, make_batch
from .tensor import Tape

#: Margin added to the chance level in the random-output predicate.
CHANCE_MARGIN = 0.02


class MetricKind(enum.Enum):
    AUROC = "AUROC"
    AP = "AP"
    ACC = "ACC"

    @classmethod
    def parse(cls, text: str) -> "MetricKind":
        for kind in cls:
            if kind.value == text:
                return kind
        raise ParameterError(f"unknown metric {text!r}")


@dataclass(frozen=True)
class EvalResult:
    metric_kind: MetricKind
    value: float
    per_task_values: tuple[float | None, ...]
    n_evaluated: int


def auroc(scores, labels) -> float:
    """Rank-statistic AUROC: P(score+ > score-) + P(tie)/2, via Mann-Whitney
    with average ranks for ties."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ParameterError("scores and labels must be equal-length vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUROC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """AP over the descending-score sweep; ties broken by stable input order."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ParameterError("scores and labels must be equal-length vectors")
    total_pos = int((y == 1).sum())
    if total_pos == 0:
        raise MetricUndefinedError("AP needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = 0
    ap = 0.0
    for rank, idx in enumerate(order, start=1):
        if y[idx] == 1:
            hits += 1
            ap += hits / rank
    return ap / total_pos


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ParameterError("predictions and labels must have equal shape")
    if p.size == 0:
        raise ParameterError("accuracy of empty input")
    return float((p == y).mean())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def model_logits(params: ModelParams, dataset: Dataset) -> np.ndarray:
    """Single forward pass over a whole split."""
    batch = make_batch(
        list(dataset.graphs), params.config.input_dim, params.config.virtual_node
    )
    tape = Tape()
    return tape.value(forward(params, batch, tape)).copy()


def evaluate_model(
    params: ModelParams, dataset: Dataset, metric_kind: MetricKind
) -> EvalResult:
    """Per-task metric over present targets, averaged across defined tasks.

    Tasks on which the metric is undefined (single class, no positives) are
    skipped and recorded as None in ``per_task_values``.
    """
    if dataset.num_graphs == 0:
        raise ParameterError("cannot evaluate on an empty dataset")
    logits = model_logits(params, dataset)

    if dataset.task_kind == "multiclass":
        if metric_kind != MetricKind.ACC:
            raise MetricUndefinedError(
                f"{metric_kind.value} is undefined for multiclass tasks"
            )
        preds = np.argmax(logits, axis=1)  # lowest index wins ties
        value = accuracy(preds, dataset.targets[:, 0])
        return EvalResult(metric_kind, value, (value,), dataset.num_graphs)

    per_task: list[float | None] = []
    n_evaluated = 0
    for t in range(dataset.num_tasks):
        mask = dataset.targets[:, t] != MISSING_TARGET
        if not mask.any():
            per_task.append(None)
            continue
        y = dataset.targets[mask, t]
        z = logits[mask, t]
        try:
            if metric_kind == MetricKind.ACC:
                per_task.append(accuracy((_sigmoid(z) > 0.5).astype(np.int64), y))
            elif metric_kind == MetricKind.AUROC:
                per_task.append(auroc(_sigmoid(z), y))
            else:
                per_task.append(average_precision(_sigmoid(z), y))
            n_evaluated += int(mask.sum())
        except MetricUndefinedError:
            per_task.append(None)
    defined = [v for v in per_task if v is not None]
    if not defined:
        raise EvaluationError(f"{metric_kind.value} undefined on every task")
    return EvalResult(metric_kind, float(np.mean(defined)), tuple(per_task), n_evaluated)


def is_random_output(
    result: EvalResult,
    task_kind: str,
    num_classes: int | None = None,
    positive_rate: float | None = None,
) -> bool:
    """Whether the metric is at or below its chance level (plus a 0.02 margin
    for ACC and AP; AUROC's chance level is exactly 0.5)."""
    v = result.value
    if result.metric_kind == MetricKind.AUROC:
        return v <= 0.5
    if result.metric_kind == MetricKind.ACC:
        if num_classes is None:
            if task_kind == "multiclass":
                raise ParameterError("ACC chance level needs num_classes")
            num_classes = 2
        return v <= 1.0 / num_classes + CHANCE_MARGIN
    if positive_rate is None:
        raise ParameterError("AP chance level needs the positive rate")
    return v <= positive_rate + CHANCE_MARGIN


def positive_rate(dataset: Dataset) -> float:
    """Prevalence of positives among present binary targets (AP chance level)."""
    if dataset.task_kind == "multiclass":
        raise ParameterError("positive rate is undefined for multiclass datasets")
    mask = dataset.target_mask()
    present = int(mask.sum())
    if present == 0:
        raise ParameterError("no present targets")
    return float((dataset.targets == 1).sum() / present)
