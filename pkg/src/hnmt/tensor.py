"""Dense double-precision tensors with tape-based reverse-mode autodiff.

Operations record themselves on the active :class:`Tape` (entered with a
``with`` block) whenever at least one input requires a gradient.  Outside a
tape every operation is a plain numpy computation, which is what decoding
uses.

There is no implicit broadcasting.  The only mixed-shape operations are
scalar scaling, :func:`add_bias` (a row vector added to every row) and
:func:`blend` (per-row selection between two states); each has its own
backward rule.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericError, VocabularyError

DTYPE = np.float64


class Tensor:
    """A dense array plus an optional gradient.

    ``node`` is the index of the tape node that produced this tensor, or
    ``None`` for leaves and untracked values.
    """

    __slots__ = ("data", "grad", "requires_grad", "node", "tape", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: int | None = None
        self.tape: Tape | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Node:
    __slots__ = ("kind", "inputs", "output", "backward")

    def __init__(self, kind, inputs, output, backward):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.backward = backward


_state = threading.local()


def _current_tape() -> Tape | None:
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered record of differentiable operations.

    Tapes are thread-confined: the active tape is tracked per thread, so
    distinct threads may record and decode concurrently.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> Tape:
        if not hasattr(_state, "stack"):
            _state.stack = []
        _state.stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.stack.pop()

    def record(self, kind: str, inputs: tuple, output: Tensor, backward: Callable) -> None:
        output.node = len(self.nodes)
        output.tape = self
        output.requires_grad = True
        self.nodes.append(Node(kind, inputs, output, backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(t) into ``t.grad`` for every tracked ancestor."""
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.tape is not self:
            raise ContractError("loss was not recorded on this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes[: loss.node + 1]):
            out = node.output
            g = grads.pop(id(out), None)
            if g is None:
                continue
            out.grad = g if out.grad is None else out.grad + g
            for t, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not t.requires_grad:
                    continue
                k = id(t)
                grads[k] = grads[k] + gi if k in grads else gi
                if t.tape is not self:
                    leaves[k] = t
        for k, t in leaves.items():
            g = grads[k]
            t.grad = g if t.grad is None else t.grad + g


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _emit(kind: str, inputs: tuple, value: np.ndarray, backward: Callable) -> Tensor:
    out = Tensor(value)
    tape = _current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(kind, inputs, out, backward)
    return out


def _check_same(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{kind}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        return (g @ B.T if a.requires_grad else None, A.T @ g if b.requires_grad else None)

    return _emit("matmul", (a, b), A @ B, bw)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes (a matrix transpose for 2-D input)."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise DimensionError(f"transpose: expected at least 2 axes, got {a.shape}")
    return _emit("transpose", (a,), np.swapaxes(a.data, -1, -2).copy(),
                 lambda g: (np.swapaxes(g, -1, -2),))


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product: (B, m, k) x (B, k, n) -> (B, m, n)."""
    a, b = as_tensor(a), as_tensor(b)
    if (a.data.ndim != 3 or b.data.ndim != 3 or a.shape[0] != b.shape[0]
            or a.shape[2] != b.shape[1]):
        raise DimensionError(f"bmm: cannot multiply {a.shape} by {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        ga = g @ np.swapaxes(B, 1, 2) if a.requires_grad else None
        gb = np.swapaxes(A, 1, 2) @ g if b.requires_grad else None
        return ga, gb

    return _emit("bmm", (a, b), A @ B, bw)


# ---------------------------------------------------------------------------
# pointwise


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same("add", a, b)
    return _emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same("sub", a, b)
    return _emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same("mul", a, b)
    A, B = a.data, b.data
    return _emit("mul", (a, b), A * B, lambda g: (g * B, g * A))


def scale(a: Tensor, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    return _emit("scale", (a,), a.data * s, lambda g: (g * s,))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add the vector ``b`` to every row of ``x``."""
    x, b = as_tensor(x), as_tensor(b)
    if b.data.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise DimensionError(f"add_bias: bias {b.shape} does not fit rows of {x.shape}")
    axes = tuple(range(x.data.ndim - 1))
    return _emit("add_bias", (x, b), x.data + b.data, lambda g: (g, g.sum(axis=axes)))


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _emit("tanh", (x,), y, lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return _emit("sigmoid", (x,), y, lambda g: (g * y * (1.0 - y),))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def blend(a: Tensor, b: Tensor, keep: np.ndarray) -> Tensor:
    """Row-wise select: ``keep[i]*a[i] + (1-keep[i])*b[i]`` with constant ``keep``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_same("blend", a, b)
    m = np.asarray(keep, dtype=DTYPE).reshape((-1,) + (1,) * (a.data.ndim - 1))
    if m.shape[0] != a.shape[0]:
        raise DimensionError(f"blend: {m.shape[0]} selectors for {a.shape[0]} rows")
    return _emit("blend", (a, b), m * a.data + (1.0 - m) * b.data, lambda g: (g * m, g * (1.0 - m)))


def dropout_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant (already rescaled) dropout mask."""
    x = as_tensor(x)
    if mask.shape != x.shape:
        raise DimensionError(f"dropout: mask {mask.shape} vs input {x.shape}")
    return _emit("dropout", (x,), x.data * mask, lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# structural


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    if not xs:
        raise ContractError("concat of nothing")
    nd = xs[0].data.ndim
    ax = axis % nd
    for x in xs[1:]:
        if x.data.ndim != nd or any(
            x.shape[i] != xs[0].shape[i] for i in range(nd) if i != ax
        ):
            raise DimensionError(
                f"concat: shapes {[t.shape for t in xs]} disagree off axis {axis}"
            )
    bounds = np.cumsum([x.shape[ax] for x in xs])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _emit("concat", tuple(xs), np.concatenate([x.data for x in xs], axis=ax), bw)


def slice_axis(x: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    """``x[start:stop]`` along ``axis``."""
    x = as_tensor(x)
    ax = axis % x.data.ndim
    n = x.shape[ax]
    if not 0 <= start < stop <= n:
        raise DimensionError(f"slice [{start}:{stop}] out of range for axis of size {n}")
    index = (slice(None),) * ax + (slice(start, stop),)

    def bw(g):
        full = np.zeros(x.shape)
        full[index] = g
        return (full,)

    return _emit("slice", (x,), x.data[index].copy(), bw)


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    return slice_axis(x, start, stop, -1)


def stack(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    for x in xs[1:]:
        _check_same("stack", xs[0], x)

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _emit("stack", tuple(xs), np.stack([x.data for x in xs], axis=axis), bw)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return _emit("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(old),))


def take_rows(table: Tensor, ids) -> Tensor:
    """Gather rows ``table[ids]``; gradients scatter back into those rows only."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = int(ids[(ids < 0) | (ids >= n)][0])
        raise VocabularyError(f"row id {bad} out of range for table with {n} rows")

    def bw(g):
        full = np.zeros(table.shape)
        np.add.at(full, ids, g)
        return (full,)

    return _emit("take_rows", (table,), table.data[ids], bw)


def total(x: Tensor) -> Tensor:
    """Sum of all entries as a scalar tensor."""
    x = as_tensor(x)
    shape = x.shape
    return _emit("sum", (x,), np.array(x.data.sum()), lambda g: (np.full(shape, float(g)),))


# ---------------------------------------------------------------------------
# softmax family


def _check_finite(x: np.ndarray, kind: str) -> None:
    if np.isnan(x).any():
        raise NumericError(f"{kind}: NaN in input")


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row softmax with max subtraction; ``mask`` zeros excluded positions."""
    x = as_tensor(x)
    _check_finite(x.data, "softmax")
    z = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != z.shape:
            raise DimensionError(f"softmax: mask {mask.shape} vs input {z.shape}")
        if not mask.any(axis=-1).all():
            raise ContractError("softmax: a row has every position masked")
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", (x,), y, bw)


def log_softmax_rows(z: np.ndarray) -> np.ndarray:
    """Untracked log-softmax for decoding."""
    _check_finite(z, "log_softmax")
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Tensor, targets, weights=None) -> Tensor:
    """Summed ``-weight * log softmax(logits)[target]`` over rows, as a scalar.

    Zero-weight rows (padding) contribute neither loss nor gradient.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    m, V = logits.shape
    if targets.shape != (m,):
        raise DimensionError(f"cross_entropy: {targets.shape} targets for {m} rows")
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=DTYPE)
    logp = log_softmax_rows(logits.data)
    rows = np.arange(m)
    loss = -(w * logp[rows, targets]).sum()

    def bw(g):
        p = np.exp(logp)
        p[rows, targets] -= 1.0
        return (float(g) * w[:, None] * p,)

    return _emit("cross_entropy", (logits,), np.array(loss), bw)


_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "concat": lambda *xs: concat(xs),
    "slice": slice_last,
}


def elementwise(kind: str, *inputs, **kw) -> Tensor:
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise ValueError(f"unknown elementwise kind {kind!r}") from None
    return fn(*inputs, **kw)


# ---------------------------------------------------------------------------
# finite-difference checking


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-5,
    coords: Iterable[int] | None = None,
) -> float:
    """Max relative error between the tape gradient of ``f`` at ``x`` and
    central differences.

    The error for each coordinate is ``|a - n| / max(1, |a|, |n|)``.  ``f``
    may close over other tensors; only ``x`` is perturbed.  ``coords``
    restricts the comparison to the given flat indices.
    """
    x.data = np.ascontiguousarray(x.data)
    saved = x.grad
    x.grad = None
    was = x.requires_grad
    x.requires_grad = True
    try:
        with Tape() as tape:
            loss = f(x)
        tape.backward(loss)
        analytic = np.zeros(x.shape) if x.grad is None else x.grad.reshape(x.shape)
    finally:
        x.grad = saved
    x.requires_grad = was
    flat = x.data.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    worst = 0.0
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        up = float(f(x).data)
        flat[i] = orig - eps
        down = float(f(x).data)
        flat[i] = orig
        num = (up - down) / (2 * eps)
        a = analytic.reshape(-1)[i]
        worst = max(worst, abs(a - num) / max(1.0, abs(a), abs(num)))
    return worst
