"""Loss values, masking, and differentiability of every loss kind."""

import numpy as np
import pytest

from ginflip.errors import LossError, ParameterError
from ginflip.graphs import MISSING_TARGET
from ginflip.losses import LossKind, loss_eval, pairwise_loss_value
from ginflip.tensor import Tape, backward, finite_diff_check


def scalar(tape, node):
    return float(tape.value(node)[0, 0])


def test_bce_at_half_probability_is_ln2():
    tape = Tape()
    logits = tape.constant(np.zeros((4, 3)))  # sigmoid -> 0.5 everywhere
    targets = np.array([[0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 1]])
    loss = loss_eval(tape, LossKind.BCE_MASKED, logits, targets)
    assert abs(scalar(tape, loss) - np.log(2)) < 1e-12


def test_bce_ignores_missing_targets():
    tape = Tape()
    logits = tape.constant(np.array([[10.0, 0.0]]))
    targets = np.array([[1, MISSING_TARGET]])
    loss = loss_eval(tape, LossKind.BCE_MASKED, logits, targets)
    # Only the first entry counts: -log(sigmoid(10)).
    assert abs(scalar(tape, loss) + np.log(1.0 / (1.0 + np.exp(-10.0)))) < 1e-9


def test_bce_all_missing_raises():
    tape = Tape()
    logits = tape.constant(np.zeros((2, 1)))
    with pytest.raises(LossError):
        loss_eval(tape, LossKind.BCE_MASKED, logits, np.full((2, 1), MISSING_TARGET))


def test_ce_uniform_logits():
    tape = Tape()
    logits = tape.constant(np.zeros((5, 3)))
    loss = loss_eval(tape, LossKind.CE, logits, np.array([0, 1, 2, 0, 1]))
    assert abs(scalar(tape, loss) - np.log(3)) < 1e-12


def test_pair_losses_zero_at_identical_outputs():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(6, 4))
    for kind in (LossKind.L1_OUTPUT, LossKind.KL_POINTWISE):
        for link in ("sigmoid", "softmax"):
            assert pairwise_loss_value(kind, logits, logits, link) == 0.0


def test_pair_losses_detect_differing_outputs():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(5, 3))
    b = a.copy()
    b[2, 1] += 0.5
    assert pairwise_loss_value(LossKind.L1_OUTPUT, a, b, "sigmoid") > 0
    # The sigmoid-link pointwise KL is signed (no (1-p) term), so only
    # nonzero is guaranteed; under softmax it is a true KL and positive.
    assert pairwise_loss_value(LossKind.KL_POINTWISE, a, b, "sigmoid") != 0
    assert pairwise_loss_value(LossKind.KL_POINTWISE, a, b, "softmax") > 0


def test_l1_value_matches_direct_formula():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))
    expected = np.abs(sig(a) - sig(b)).mean()
    assert abs(pairwise_loss_value(LossKind.L1_OUTPUT, a, b, "sigmoid") - expected) < 1e-12


def test_kl_value_matches_direct_formula_softmax():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))

    def softmax(z):
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    pa, pb = softmax(a).clip(1e-7, 1 - 1e-7), softmax(b).clip(1e-7, 1 - 1e-7)
    expected = (pa * (np.log(pa) - np.log(pb))).sum(axis=1).mean()
    got = pairwise_loss_value(LossKind.KL_POINTWISE, a, b, "softmax")
    assert abs(got - expected) < 1e-12


def test_pair_loss_requires_node_argument():
    tape = Tape()
    a = tape.constant(np.zeros((2, 2)))
    with pytest.raises(ParameterError):
        loss_eval(tape, LossKind.L1_OUTPUT, a, np.zeros((2, 2)))


@pytest.mark.parametrize(
    "kind,link",
    [
        (LossKind.BCE_MASKED, "sigmoid"),
        (LossKind.CE, "softmax"),
        (LossKind.L1_OUTPUT, "sigmoid"),
        (LossKind.KL_POINTWISE, "sigmoid"),
        (LossKind.KL_POINTWISE, "softmax"),
    ],
)
def test_losses_are_differentiable(kind, link):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 3))
    w0 = rng.normal(size=(3, 4)) * 0.6
    targets_bin = rng.integers(0, 2, size=(5, 4))
    targets_bin[1, 2] = MISSING_TARGET
    targets_cls = rng.integers(0, 4, size=5)
    x2 = rng.normal(size=(5, 3))

    def f(params):
        (w,) = params
        tape = Tape()
        node = tape.leaf(w)
        logits = tape.matmul(tape.constant(x), node)
        if kind == LossKind.BCE_MASKED:
            loss = loss_eval(tape, kind, logits, targets_bin)
        elif kind == LossKind.CE:
            loss = loss_eval(tape, kind, logits, targets_cls)
        else:
            logits2 = tape.matmul(tape.constant(x2), node)
            loss = loss_eval(tape, kind, logits, logits2, link=link)
        grads = backward(tape, loss)
        return scalar(tape, loss), [grads[node]]

    assert finite_diff_check(f, [w0], epsilon=1e-5) <= 1e-4
