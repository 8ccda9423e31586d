"""Minimal dense-matrix engine with reverse-mode differentiation.

Values are 2-D float64 numpy arrays; every primitive records itself on a
Tape and returns an integer node id.  No broadcasting beyond the row-wise
bias add; all other elementwise ops require exactly matching shapes, which
keeps the gradient audit surface small.

Conventions fixed here: relu and abs use subgradient 0 at 0, and clamp
passes gradient only strictly inside the interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ShapeError


def as_matrix(value, *, check_finite: bool = True) -> np.ndarray:
    """Coerce to a 2-D float64 array, validating finiteness."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={arr.ndim}")
    if check_finite and not np.isfinite(arr).all():
        raise ContractError("non-finite entries")
    return arr


@dataclass
class _Node:
    op: str
    value: np.ndarray
    inputs: tuple[int, ...]
    aux: object
    requires_grad: bool


class Tape:
    """Single-writer record of primitive applications; nodes are int ids."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self.named_leaves: dict[str, int] = {}

    def _push(self, op, value, inputs=(), aux=None) -> int:
        requires = any(self._nodes[i].requires_grad for i in inputs)
        self._nodes.append(_Node(op, value, tuple(inputs), aux, requires))
        return len(self._nodes) - 1

    def value(self, node: int) -> np.ndarray:
        return self._nodes[node].value

    def shape(self, node: int) -> tuple[int, int]:
        return self._nodes[node].value.shape

    # -- inputs ---------------------------------------------------------

    def leaf(self, value, name: str | None = None) -> int:
        """Differentiable input; backward() reports its gradient."""
        node = self._push("leaf", as_matrix(value))
        self._nodes[node].requires_grad = True
        if name is not None:
            if name in self.named_leaves:
                raise ContractError(f"duplicate leaf name {name!r}")
            self.named_leaves[name] = node
        return node

    def constant(self, value) -> int:
        """Non-differentiable input (features, targets, masks)."""
        return self._push("constant", as_matrix(value))

    # -- primitives -------------------------------------------------------

    def matmul(self, a: int, b: int) -> int:
        va, vb = self.value(a), self.value(b)
        if va.shape[1] != vb.shape[0]:
            raise ShapeError(f"matmul {va.shape} @ {vb.shape}")
        return self._push("matmul", va @ vb, (a, b))

    def _elementwise_pair(self, op, a, b, fn):
        va, vb = self.value(a), self.value(b)
        if va.shape != vb.shape:
            raise ShapeError(f"{op} {va.shape} vs {vb.shape}")
        return self._push(op, fn(va, vb), (a, b))

    def add(self, a: int, b: int) -> int:
        return self._elementwise_pair("add", a, b, np.add)

    def sub(self, a: int, b: int) -> int:
        return self._elementwise_pair("sub", a, b, np.subtract)

    def mul(self, a: int, b: int) -> int:
        return self._elementwise_pair("mul", a, b, np.multiply)

    def add_bias_rowwise(self, x: int, b: int) -> int:
        vx, vb = self.value(x), self.value(b)
        if vb.shape != (1, vx.shape[1]):
            raise ShapeError(f"bias {vb.shape} for matrix {vx.shape}")
        return self._push("add_bias_rowwise", vx + vb, (x, b))

    def relu(self, x: int) -> int:
        return self._push("relu", np.maximum(self.value(x), 0.0), (x,))

    def sigmoid(self, x: int) -> int:
        vx = self.value(x)
        out = np.empty_like(vx)
        pos = vx >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-vx[pos]))
        e = np.exp(vx[~pos])
        out[~pos] = e / (1.0 + e)
        return self._push("sigmoid", out, (x,))

    def log_softmax_rowwise(self, x: int) -> int:
        vx = self.value(x)
        shifted = vx - vx.max(axis=1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return self._push("log_softmax_rowwise", out, (x,))

    def scale(self, x: int, c: float) -> int:
        return self._push("scale", self.value(x) * float(c), (x,), aux=float(c))

    def log(self, x: int) -> int:
        vx = self.value(x)
        if (vx <= 0).any():
            raise ContractError("log of non-positive value")
        return self._push("log", np.log(vx), (x,))

    def exp(self, x: int) -> int:
        return self._push("exp", np.exp(self.value(x)), (x,))

    def abs(self, x: int) -> int:
        return self._push("abs", np.abs(self.value(x)), (x,))

    def clamp(self, x: int, lo: float, hi: float) -> int:
        return self._push(
            "clamp", np.clip(self.value(x), lo, hi), (x,), aux=(float(lo), float(hi))
        )

    def sum_all(self, x: int) -> int:
        return self._push("sum_all", np.array([[self.value(x).sum()]]), (x,))

    def concat_cols(self, nodes: Sequence[int]) -> int:
        if not nodes:
            raise ShapeError("concat_cols of nothing")
        values = [self.value(n) for n in nodes]
        rows = values[0].shape[0]
        if any(v.shape[0] != rows for v in values):
            raise ShapeError("concat_cols needs equal row counts")
        widths = tuple(v.shape[1] for v in values)
        return self._push("concat_cols", np.concatenate(values, axis=1), tuple(nodes), aux=widths)

    def concat_rows(self, nodes: Sequence[int]) -> int:
        if not nodes:
            raise ShapeError("concat_rows of nothing")
        values = [self.value(n) for n in nodes]
        cols = values[0].shape[1]
        if any(v.shape[1] != cols for v in values):
            raise ShapeError("concat_rows needs equal column counts")
        heights = tuple(v.shape[0] for v in values)
        return self._push("concat_rows", np.concatenate(values, axis=0), tuple(nodes), aux=heights)

    def segment_sum(self, x: int, segment_ids, num_segments: int) -> int:
        vx = self.value(x)
        ids = np.asarray(segment_ids, dtype=np.int64)
        if ids.shape != (vx.shape[0],):
            raise ShapeError("segment_ids must have one id per row")
        if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
            raise ShapeError("segment id out of range")
        out = np.zeros((num_segments, vx.shape[1]))
        np.add.at(out, ids, vx)
        return self._push("segment_sum", out, (x,), aux=ids)

    def gather_rows(self, x: int, row_ids) -> int:
        vx = self.value(x)
        ids = np.asarray(row_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= vx.shape[0]):
            raise ShapeError("row id out of range")
        return self._push("gather_rows", vx[ids], (x,), aux=(ids, vx.shape[0]))

    def scale_rows(self, x: int, factors) -> int:
        vx = self.value(x)
        f = np.asarray(factors, dtype=np.float64).reshape(-1)
        if f.shape[0] != vx.shape[0]:
            raise ShapeError("one factor per row required")
        return self._push("scale_rows", vx * f[:, None], (x,), aux=f)


def backward(tape: Tape, loss_node: int) -> dict[int, np.ndarray]:
    """Reverse-mode gradients of a scalar loss for every differentiable leaf.

    Returns a map from leaf node id to its gradient array.
    """
    nodes = tape._nodes
    if nodes[loss_node].value.shape != (1, 1):
        raise ContractError(
            f"loss must be scalar (1x1), got {nodes[loss_node].value.shape}"
        )
    grads: dict[int, np.ndarray] = {loss_node: np.ones((1, 1))}

    for nid in range(loss_node, -1, -1):
        node = nodes[nid]
        g = grads.pop(nid, None)
        if g is None or not node.requires_grad:
            continue

        def send(target: int, grad: np.ndarray):
            if not nodes[target].requires_grad:
                return
            if target in grads:
                grads[target] = grads[target] + grad
            else:
                grads[target] = grad

        op, inp = node.op, node.inputs
        if op in ("leaf", "constant"):
            grads[nid] = g  # keep leaf gradients for the result map
            continue
        if op == "matmul":
            a, b = inp
            send(a, g @ tape.value(b).T)
            send(b, tape.value(a).T @ g)
        elif op == "add":
            send(inp[0], g)
            send(inp[1], g)
        elif op == "sub":
            send(inp[0], g)
            send(inp[1], -g)
        elif op == "mul":
            send(inp[0], g * tape.value(inp[1]))
            send(inp[1], g * tape.value(inp[0]))
        elif op == "add_bias_rowwise":
            send(inp[0], g)
            send(inp[1], g.sum(axis=0, keepdims=True))
        elif op == "relu":
            send(inp[0], g * (tape.value(inp[0]) > 0))
        elif op == "sigmoid":
            y = node.value
            send(inp[0], g * y * (1.0 - y))
        elif op == "log_softmax_rowwise":
            softmax = np.exp(node.value)
            send(inp[0], g - softmax * g.sum(axis=1, keepdims=True))
        elif op == "scale":
            send(inp[0], g * node.aux)
        elif op == "log":
            send(inp[0], g / tape.value(inp[0]))
        elif op == "exp":
            send(inp[0], g * node.value)
        elif op == "abs":
            send(inp[0], g * np.sign(tape.value(inp[0])))
        elif op == "clamp":
            lo, hi = node.aux
            x = tape.value(inp[0])
            send(inp[0], g * ((x > lo) & (x < hi)))
        elif op == "sum_all":
            send(inp[0], np.full(tape.value(inp[0]).shape, g[0, 0]))
        elif op == "concat_cols":
            start = 0
            for child, width in zip(inp, node.aux):
                send(child, g[:, start : start + width])
                start += width
        elif op == "concat_rows":
            start = 0
            for child, height in zip(inp, node.aux):
                send(child, g[start : start + height])
                start += height
        elif op == "segment_sum":
            send(inp[0], g[node.aux])
        elif op == "gather_rows":
            ids, num_rows = node.aux
            dx = np.zeros((num_rows, g.shape[1]))
            np.add.at(dx, ids, g)
            send(inp[0], dx)
        elif op == "scale_rows":
            send(inp[0], g * node.aux[:, None])
        else:  # pragma: no cover
            raise ContractError(f"no backward rule for op {op!r}")

    return {
        nid: grads[nid]
        for nid, node in enumerate(nodes)
        if node.op == "leaf" and nid in grads
    }


def finite_diff_check(
    f: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
    params: list[np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """Max relative error of analytic gradients against central differences.

    ``f(params)`` must return (scalar value, gradient per parameter).  The
    relative error denominator is max(|analytic|, |numeric|, 1e-12).
    """
    if epsilon <= 0:
        raise ContractError("epsilon must be positive")
    params = [np.array(p, dtype=np.float64) for p in params]
    _, grads = f(params)
    worst = 0.0
    for pi, p in enumerate(params):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + epsilon
            up, _ = f(params)
            p[idx] = orig - epsilon
            down, _ = f(params)
            p[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            analytic = grads[pi][idx]
            denom = max(abs(analytic), abs(numeric), 1e-12)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
