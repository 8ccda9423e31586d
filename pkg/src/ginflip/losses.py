"""Loss functions, built from tape primitives so gradients come from the
same reverse-mode path that the finite-difference oracle checks.

BCE/CE take targets; L1/KL compare two sets of model outputs (the latter pair
is what the injectivity attacks minimize).  Probabilities are clamped to
[1e-7, 1 - 1e-7] before any logarithm.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import LossError, ParameterError, ShapeError
from .graphs import MISSING_TARGET
from .tensor import Tape

PROB_CLAMP = 1e-7


class LossKind(enum.Enum):
    BCE_MASKED = "BCE-masked"
    CE = "CE"
    L1_OUTPUT = "L1-output"
    KL_POINTWISE = "KL-pointwise"

    @classmethod
    def parse(cls, text: str) -> "LossKind":
        for kind in cls:
            if kind.value == text:
                return kind
        raise ParameterError(f"unknown loss kind {text!r}")


#: Output link applied before the pairwise KL, per task kind.
KL_LINKS = {"binary-single": "sigmoid", "binary-multi": "sigmoid", "multiclass": "softmax"}


def _clamped_probs(tape: Tape, logits: int, link: str) -> int:
    if link == "sigmoid":
        p = tape.sigmoid(logits)
    elif link == "softmax":
        p = tape.exp(tape.log_softmax_rowwise(logits))
    else:
        raise ParameterError(f"unknown link {link!r}")
    return tape.clamp(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_masked(tape: Tape, logits: int, targets: np.ndarray) -> int:
    """Mean elementwise binary cross entropy over the present targets."""
    t = np.asarray(targets, dtype=np.int64)
    if t.shape != tape.shape(logits):
        raise ShapeError(f"targets {t.shape} vs logits {tape.shape(logits)}")
    mask = (t != MISSING_TARGET).astype(np.float64)
    n_valid = mask.sum()
    if n_valid == 0:
        raise LossError("all targets missing in batch")
    t_pos = tape.constant(np.where(t == 1, 1.0, 0.0))
    t_neg = tape.constant(np.where(t == 0, 1.0, 0.0))
    p = _clamped_probs(tape, logits, "sigmoid")
    one = tape.constant(np.ones(t.shape))
    ll = tape.add(
        tape.mul(t_pos, tape.log(p)), tape.mul(t_neg, tape.log(tape.sub(one, p)))
    )
    masked = tape.mul(ll, tape.constant(mask))
    return tape.scale(tape.sum_all(masked), -1.0 / n_valid)


def cross_entropy(tape: Tape, logits: int, class_indices: np.ndarray) -> int:
    """Mean negative log-likelihood under a row-wise softmax."""
    idx = np.asarray(class_indices, dtype=np.int64).reshape(-1)
    n, m = tape.shape(logits)
    if idx.shape[0] != n:
        raise ShapeError(f"{idx.shape[0]} class indices for {n} rows")
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise ParameterError("class index out of range")
    onehot = np.zeros((n, m))
    onehot[np.arange(n), idx] = 1.0
    picked = tape.mul(tape.constant(onehot), tape.log_softmax_rowwise(logits))
    return tape.scale(tape.sum_all(picked), -1.0 / n)


def l1_output(tape: Tape, logits_a: int, logits_b: int) -> int:
    """Mean absolute difference of the sigmoid outputs, over all entries."""
    n, m = tape.shape(logits_a)
    diff = tape.abs(tape.sub(tape.sigmoid(logits_a), tape.sigmoid(logits_b)))
    return tape.scale(tape.sum_all(diff), 1.0 / (n * m))


def kl_pointwise(tape: Tape, logits_a: int, logits_b: int, link: str) -> int:
    """Mean over samples of sum_classes p_a * (log p_a - log p_b)."""
    n, _ = tape.shape(logits_a)
    pa = _clamped_probs(tape, logits_a, link)
    pb = _clamped_probs(tape, logits_b, link)
    term = tape.mul(pa, tape.sub(tape.log(pa), tape.log(pb)))
    return tape.scale(tape.sum_all(term), 1.0 / n)


def loss_eval(
    tape: Tape,
    kind: LossKind,
    outputs_a: int,
    outputs_b_or_targets,
    mask=None,
    link: str = "sigmoid",
) -> int:
    """Scalar loss node for any LossKind.

    ``outputs_b_or_targets`` is a target array for BCE/CE and a second
    logits node for L1/KL.  ``mask`` (BCE only) overrides the mask derived
    from missing targets.  ``link`` selects sigmoid or softmax for KL.
    """
    if kind == LossKind.BCE_MASKED:
        targets = np.asarray(outputs_b_or_targets, dtype=np.int64)
        if mask is not None:
            targets = np.where(np.asarray(mask, dtype=bool), targets, MISSING_TARGET)
        return bce_masked(tape, outputs_a, targets)
    if kind == LossKind.CE:
        return cross_entropy(tape, outputs_a, outputs_b_or_targets)
    if not isinstance(outputs_b_or_targets, (int, np.integer)):
        raise ParameterError(f"{kind.value} compares two model outputs")
    b = int(outputs_b_or_targets)
    if tape.shape(outputs_a) != tape.shape(b):
        raise ShapeError(
            f"output shapes differ: {tape.shape(outputs_a)} vs {tape.shape(b)}"
        )
    if kind == LossKind.L1_OUTPUT:
        return l1_output(tape, outputs_a, b)
    return kl_pointwise(tape, outputs_a, b, link)


def pairwise_loss_value(kind: LossKind, logits_a, logits_b, link: str) -> float:
    """Numeric value of an output-pair loss on fixed logits (used by the
    input-pair search; same tape construction, constant inputs)."""
    tape = Tape()
    a = tape.constant(logits_a)
    b = tape.constant(logits_b)
    return float(tape.value(loss_eval(tape, kind, a, b, link=link))[0, 0])
