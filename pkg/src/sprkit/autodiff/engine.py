"""Reverse-mode automatic differentiation over dense float64 arrays.

A single module-level tape records every operation whose output needs a
gradient. ``backward`` walks the tape once in reverse, deposits dLoss/dLeaf
into each leaf's ``grad`` buffer, and frees the tape. There is no
broadcasting: callers align shapes explicitly (usually with ``ones`` /
``reshape`` / ``matmul``), which keeps every backward rule a one-liner.

The tape is strictly single-threaded. Tensor values may be shared across
threads only while no graph is being built.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, NumericDomainError

_RECIPROCAL_FLOOR = 1e-12


class Tensor:
    """Dense float64 array plus its position in the differentiation graph.

    ``grad`` accumulates across successive ``backward`` calls until
    ``zero_grad`` (or manual reset); leaves are tensors not produced by a
    recorded operation.
    """

    __slots__ = ("data", "requires_grad", "grad", "node_id", "_from_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node_id = Graph.default._new_id()
        self._from_op = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


class OpRecord:
    __slots__ = ("op", "out_id", "input_ids", "grad_fn")

    def __init__(self, op, out_id, input_ids, grad_fn):
        self.op = op
        self.out_id = out_id
        self.input_ids = input_ids
        self.grad_fn = grad_fn


class Graph:
    """Append-only tape of operation records, freed after each backward.

    Inputs of a record always precede it on the tape, so one reverse pass
    visits every node exactly once (asserted via a visit counter).
    """

    default: "Graph"

    def __init__(self):
        self.records: list[OpRecord] = []
        self._leaves: dict[int, Tensor] = {}
        self._counter = 0
        self.enabled = True
        self.last_visit_counts: dict[int, int] = {}

    def _new_id(self) -> int:
        self._counter += 1
        return self._counter

    def record(self, op: str, out: Tensor, inputs: Sequence[Tensor],
               grad_fn: Callable) -> None:
        ids = []
        for t in inputs:
            ids.append(t.node_id)
            if t.requires_grad and not t._from_op:
                self._leaves[t.node_id] = t
        out._from_op = True
        self.records.append(OpRecord(op, out.node_id, tuple(ids), grad_fn))

    def clear(self) -> None:
        self.records = []
        self._leaves = {}

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ContractError(
                f"backward expects a scalar loss, got shape {loss.data.shape}")
        grads: dict[int, np.ndarray] = {
            loss.node_id: np.ones_like(loss.data)}
        visits: dict[int, int] = {}
        for rec in reversed(self.records):
            g = grads.pop(rec.out_id, None)
            if g is None:
                continue
            visits[rec.out_id] = visits.get(rec.out_id, 0) + 1
            if visits[rec.out_id] > 1:
                raise ContractError("graph node visited twice in backward")
            for iid, ig in zip(rec.input_ids, rec.grad_fn(g)):
                if ig is None:
                    continue
                acc = grads.get(iid)
                grads[iid] = ig if acc is None else acc + ig
        for tid, leaf in self._leaves.items():
            g = grads.get(tid)
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.data)
            if g is not None:
                leaf.grad += g
        self.last_visit_counts = visits
        self.clear()


Graph.default = Graph()


class no_grad:
    """Context manager that suspends tape recording (inference mode)."""

    def __enter__(self):
        self._prev = Graph.default.enabled
        Graph.default.enabled = False
        return self

    def __exit__(self, *exc):
        Graph.default.enabled = self._prev
        return False


def _recording(*tensors: Tensor) -> bool:
    return Graph.default.enabled and any(t.requires_grad for t in tensors)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires-grad leaf reachable from *loss*.

    Repeated calls (on freshly built graphs) accumulate; the consumed tape
    is freed afterwards.
    """
    Graph.default.backward(loss)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(
            f"matmul expects 2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data @ b.data)
    if _recording(a, b):
        out.requires_grad = True
        ad, bd = a.data, b.data
        need_a, need_b = a.requires_grad, b.requires_grad

        def grad_fn(g):
            return (g @ bd.T if need_a else None,
                    ad.T @ g if need_b else None)

        Graph.default.record("matmul", out, (a, b), grad_fn)
    return out


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(
            f"{op} requires identical shapes, got {a.data.shape} and {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)
    out = Tensor(a.data + b.data)
    if _recording(a, b):
        out.requires_grad = True
        need_a, need_b = a.requires_grad, b.requires_grad
        Graph.default.record(
            "add", out, (a, b),
            lambda g: (g if need_a else None, g if need_b else None))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    out = Tensor(a.data - b.data)
    if _recording(a, b):
        out.requires_grad = True
        need_a, need_b = a.requires_grad, b.requires_grad
        Graph.default.record(
            "sub", out, (a, b),
            lambda g: (g if need_a else None, -g if need_b else None))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    out = Tensor(a.data * b.data)
    if _recording(a, b):
        out.requires_grad = True
        ad, bd = a.data, b.data
        need_a, need_b = a.requires_grad, b.requires_grad
        Graph.default.record(
            "mul", out, (a, b),
            lambda g: (g * bd if need_a else None, g * ad if need_b else None))
    return out


def elementwise(a: Tensor, b: Tensor, kind: str) -> Tensor:
    """Pointwise add/sub/mul on identically shaped tensors."""
    try:
        fn = {"add": add, "sub": sub, "mul": mul}[kind]
    except KeyError:
        raise ContractError(f"unknown elementwise kind {kind!r}") from None
    return fn(a, b)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def unary(a: Tensor, kind: str) -> Tensor:
    """Pointwise map with exact analytic backward.

    Kinds: exp, softplus, tanh, silu, neg, reciprocal, sqrt, abs.
    ``reciprocal`` rejects entries within 1e-12 of zero; ``sqrt`` rejects
    negatives.
    """
    x = a.data
    if kind == "exp":
        y = np.exp(x)
        dfn = lambda g: g * y
    elif kind == "softplus":
        y = np.logaddexp(0.0, x)
        dfn = lambda g: g * _sigmoid(x)
    elif kind == "tanh":
        y = np.tanh(x)
        dfn = lambda g: g * (1.0 - y * y)
    elif kind == "silu":
        s = _sigmoid(x)
        y = x * s
        dfn = lambda g: g * (s * (1.0 + x * (1.0 - s)))
    elif kind == "neg":
        y = -x
        dfn = lambda g: -g
    elif kind == "reciprocal":
        if x.size and np.min(np.abs(x)) <= _RECIPROCAL_FLOOR:
            raise NumericDomainError(
                "reciprocal of entry with magnitude <= 1e-12")
        y = 1.0 / x
        dfn = lambda g: -g * y * y
    elif kind == "sqrt":
        if x.size and np.min(x) < 0.0:
            raise NumericDomainError("sqrt of negative entry")
        y = np.sqrt(x)
        dfn = lambda g: g * 0.5 / y
    elif kind == "abs":
        y = np.abs(x)
        dfn = lambda g: g * np.sign(x)
    else:
        raise ContractError(f"unknown unary kind {kind!r}")
    out = Tensor(y)
    if _recording(a):
        out.requires_grad = True
        Graph.default.record(kind, out, (a,), lambda g: (dfn(g),))
    return out


def exp(a: Tensor) -> Tensor:
    return unary(a, "exp")


def softplus(a: Tensor) -> Tensor:
    return unary(a, "softplus")


def tanh(a: Tensor) -> Tensor:
    return unary(a, "tanh")


def silu(a: Tensor) -> Tensor:
    return unary(a, "silu")


def neg(a: Tensor) -> Tensor:
    return unary(a, "neg")


def reciprocal(a: Tensor) -> Tensor:
    return unary(a, "reciprocal")


def sqrt(a: Tensor) -> Tensor:
    return unary(a, "sqrt")


def absolute(a: Tensor) -> Tensor:
    return unary(a, "abs")


def reduce(a: Tensor, kind: str, axis: int | None = None) -> Tensor:
    """Sum or mean over all entries (axis=None) or one axis (dropped)."""
    if kind not in ("sum", "mean"):
        raise ContractError(f"unknown reduce kind {kind!r}")
    x = a.data
    if axis is not None and not (-x.ndim <= axis < x.ndim):
        raise DimensionError(
            f"reduce axis {axis} out of range for rank {x.ndim}")
    y = x.sum(axis=axis) if kind == "sum" else x.mean(axis=axis)
    out = Tensor(y)
    if _recording(a):
        out.requires_grad = True
        shape = x.shape
        n = x.size if axis is None else shape[axis]
        scale = 1.0 if kind == "sum" else 1.0 / n

        def grad_fn(g):
            if axis is None:
                return (np.full(shape, float(g) * scale),)
            gx = np.expand_dims(g, axis) * scale
            return (np.broadcast_to(gx, shape).copy(),)

        Graph.default.record(kind, out, (a,), grad_fn)
    return out


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    return reduce(a, "sum", axis)


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    return reduce(a, "mean", axis)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (no graph input for the constant)."""
    c = float(c)
    out = Tensor(a.data * c)
    if _recording(a):
        out.requires_grad = True
        Graph.default.record("scale", out, (a,), lambda g: (g * c,))
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        y = a.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(str(e)) from None
    out = Tensor(y.copy())
    if _recording(a):
        out.requires_grad = True
        old = a.data.shape
        Graph.default.record("reshape", out, (a,),
                             lambda g: (g.reshape(old),))
    return out


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Rows start:stop of a 2-D tensor; backward zero-pads the complement."""
    if a.data.ndim != 2:
        raise DimensionError(f"slice_rows expects 2-D, got {a.data.shape}")
    n = a.data.shape[0]
    if not (0 <= start < stop <= n):
        raise DimensionError(f"slice_rows [{start}:{stop}] out of range for {n} rows")
    out = Tensor(a.data[start:stop].copy())
    if _recording(a):
        out.requires_grad = True
        shape = a.data.shape

        def grad_fn(g):
            gx = np.zeros(shape)
            gx[start:stop] = g
            return (gx,)

        Graph.default.record("slice_rows", out, (a,), grad_fn)
    return out


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors along axis 0; backward splits by row counts."""
    if not parts:
        raise ContractError("concat_rows of empty sequence")
    for p in parts:
        if p.data.ndim != 2:
            raise DimensionError(f"concat_rows expects 2-D parts, got {p.data.shape}")
    out = Tensor(np.concatenate([p.data for p in parts], axis=0))
    if _recording(*parts):
        out.requires_grad = True
        counts = [p.data.shape[0] for p in parts]
        needs = [p.requires_grad for p in parts]

        def grad_fn(g):
            pieces = []
            at = 0
            for c, need in zip(counts, needs):
                pieces.append(g[at:at + c] if need else None)
                at += c
            return tuple(pieces)

        Graph.default.record("concat_rows", out, tuple(parts), grad_fn)
    return out


def tile_block(a: Tensor, k: int) -> Tensor:
    """Stack k copies of a 2-D tensor vertically: (R, C) -> (k*R, C).

    Backward sums the k copies. This is the explicit replacement for row
    broadcasting.
    """
    if a.data.ndim != 2:
        raise DimensionError(f"tile_block expects 2-D, got {a.data.shape}")
    r, c = a.data.shape
    out = Tensor(np.tile(a.data, (k, 1)))
    if _recording(a):
        out.requires_grad = True
        Graph.default.record(
            "tile_block", out, (a,),
            lambda g: (g.reshape(k, r, c).sum(axis=0),))
    return out


def repeat_rows(a: Tensor, k: int) -> Tensor:
    """Repeat each row k times in place: (R, C) -> (R*k, C), row i of the
    input occupying output rows i*k..(i+1)*k."""
    if a.data.ndim != 2:
        raise DimensionError(f"repeat_rows expects 2-D, got {a.data.shape}")
    r, c = a.data.shape
    out = Tensor(np.repeat(a.data, k, axis=0))
    if _recording(a):
        out.requires_grad = True
        Graph.default.record(
            "repeat_rows", out, (a,),
            lambda g: (g.reshape(r, k, c).sum(axis=1),))
    return out


def broadcast_rows(v: Tensor, rows: int) -> Tensor:
    """Tile a (1, D) row vector to (rows, D)."""
    if v.data.ndim != 2 or v.data.shape[0] != 1:
        raise DimensionError(f"broadcast_rows expects (1, D), got {v.data.shape}")
    return tile_block(v, rows)


def broadcast_cols(v: Tensor, cols: int) -> Tensor:
    """Tile a (D, 1) column vector to (D, cols); backward sums columns."""
    if v.data.ndim != 2 or v.data.shape[1] != 1:
        raise DimensionError(f"broadcast_cols expects (D, 1), got {v.data.shape}")
    out = Tensor(np.broadcast_to(v.data, (v.data.shape[0], cols)).copy())
    if _recording(v):
        out.requires_grad = True
        Graph.default.record(
            "broadcast_cols", out, (v,),
            lambda g: (g.sum(axis=1, keepdims=True),))
    return out


_ONES_CACHE: dict[tuple[int, int], Tensor] = {}


def ones_const(rows: int, cols: int) -> Tensor:
    """Cached constant matrix of ones, used for explicit shape alignment."""
    key = (rows, cols)
    t = _ONES_CACHE.get(key)
    if t is None:
        t = Tensor(np.ones((rows, cols)))
        _ONES_CACHE[key] = t
    return t
