"""STE training loop: Adam over full-precision shadow weights, forward through
the frozen-scale quantizer, gradients passed straight through inside the clip
range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, TrainingDivergenceError
from .graphs import MISSING_TARGET, Dataset
from .losses import LossKind, loss_eval
from .metrics import MetricKind, evaluate_model
from .models import ModelParams, forward, make_batch
from .quant import dequantize, quantize, ste_backward
from .rng import SplitMix64, derive_seed
from .tensor import Tape, backward


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    train_metric: float
    valid_metric: float


def training_loss_kind(task_kind: str) -> LossKind:
    return LossKind.CE if task_kind == "multiclass" else LossKind.BCE_MASKED


def _batch_loss(params, dataset, indices, loss_kind):
    batch = make_batch(
        [dataset.graphs[i] for i in indices],
        params.config.input_dim,
        params.config.virtual_node,
    )
    tape = Tape()
    logits = forward(params, batch, tape)
    targets = dataset.targets[list(indices)]
    if loss_kind == LossKind.CE:
        loss = loss_eval(tape, loss_kind, logits, targets.reshape(-1))
    else:
        loss = loss_eval(tape, loss_kind, logits, targets)
    return tape, loss


def dataset_loss(params: ModelParams, dataset: Dataset) -> float:
    """Full-split loss under the training objective (no gradients kept)."""
    kind = training_loss_kind(dataset.task_kind)
    tape, loss = _batch_loss(params, dataset, range(dataset.num_graphs), kind)
    return float(tape.value(loss)[0, 0])


class _Adam:
    def __init__(self, shapes: dict[str, tuple[int, int]], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.t = 0
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}

    def step(self, values: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for key, g in grads.items():
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            step = self.lr * (self.m[key] / b1c) / (np.sqrt(self.v[key] / b2c) + self.eps)
            values[key] = values[key] - step


def train_quantized(
    model: ModelParams,
    train: Dataset,
    valid: Dataset,
    epochs: int = 30,
    lr: float = 1e-3,
    *,
    batch_size: int = 32,
    seed: int = 0,
    metric_kind: MetricKind = MetricKind.ACC,
) -> tuple[ModelParams, list[EpochRecord]]:
    """Mini-batch STE training; returns the trained quantized model and the
    per-epoch train/valid history.

    Shadow full-precision weights start at the dequantized initial codes and
    drift inside the frozen per-tensor scales; each forward re-quantizes the
    shadows, and the straight-through estimate zeroes gradients of clipped
    entries.  Deterministic under ``seed``.
    """
    if train.num_graphs == 0 or valid.num_graphs == 0:
        raise ParameterError("train and valid splits must be non-empty")
    if epochs < 0:
        raise ParameterError("epochs must be non-negative")
    cfg = model.config
    loss_kind = training_loss_kind(train.task_kind)

    shadows = {name: dequantize(q) for name, q in model.weights.items()}
    scales = {name: q.scale for name, q in model.weights.items()}
    clips = {name: q.clip_range for name, q in model.weights.items()}
    biases = {name: b.copy() for name, b in model.biases.items()}

    opt = _Adam({k: v.shape for k, v in {**shadows, **biases}.items()}, lr)

    def snapshot() -> ModelParams:
        return ModelParams(
            cfg,
            {
                name: quantize(shadows[name], scale=scales[name], clip_range=clips[name])
                for name in shadows
            },
            {name: b.copy() for name, b in biases.items()},
        )

    history: list[EpochRecord] = []
    n = train.num_graphs
    for epoch in range(epochs):
        order = SplitMix64(derive_seed(seed, "train-shuffle", epoch)).permutation(n)
        losses = []  # (value, weight); weighted by evaluated targets so the epoch mean is shuffle-free
        for bi in range(0, n, batch_size):
            indices = order[bi : bi + batch_size]
            params = snapshot()
            tape, loss = _batch_loss(params, train, indices, loss_kind)
            value = float(tape.value(loss)[0, 0])
            if not np.isfinite(value):
                raise TrainingDivergenceError(epoch, bi // batch_size)
            if loss_kind == LossKind.CE:
                weight = len(indices)
            else:
                weight = int((train.targets[list(indices)] != MISSING_TARGET).sum())
            losses.append((value, weight))
            grads = backward(tape, loss)
            named = {
                name: grads[nid]
                for name, nid in tape.named_leaves.items()
                if nid in grads
            }
            updates: dict[str, np.ndarray] = {}
            for name in shadows:
                if name in named:
                    lo, hi = clips[name]
                    updates[name] = ste_backward(
                        named[name], shadows[name], (lo * scales[name], hi * scales[name])
                    )
            for name in biases:
                if name in named:
                    updates[name] = named[name]
            merged = {**shadows, **biases}
            opt.step(merged, updates)
            for name in shadows:
                shadows[name] = merged[name]
            for name in biases:
                biases[name] = merged[name]

        params = snapshot()
        total = sum(size for _, size in losses)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=sum(v * size for v, size in losses) / total,
                valid_loss=dataset_loss(params, valid),
                train_metric=evaluate_model(params, train, metric_kind).value,
                valid_metric=evaluate_model(params, valid, metric_kind).value,
            )
        )

    return snapshot(), history
