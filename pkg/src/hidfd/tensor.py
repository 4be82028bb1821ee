"""A small reverse-mode automatic differentiation engine over float64 arrays.

Operations executed inside an active :class:`Tape` are recorded when any
input requires a gradient; :func:`backward` walks the record in reverse.
Outside a tape the same functions simply compute values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Operand shapes do not conform for an operation."""


class ContractError(RuntimeError):
    """A precondition of the autodiff API was violated."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.grad = None
        t.node = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        raise TypeError("division is only supported by a python scalar")

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _lift(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor._wrap(np.asarray(x, dtype=np.float64))


@dataclass(eq=False)
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    forward: Callable[..., np.ndarray]
    backward: Callable[..., tuple]


class Tape:
    """Ordered record of primitive operations.

    Use as a context manager; nested tapes shadow outer ones.
    """

    _stack: list["Tape"] = []

    def __init__(self):
        self.nodes: list[Node] = []
        self._outputs: set[int] = set()

    def __enter__(self) -> "Tape":
        Tape._stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)
        self._outputs.add(id(node.output))

    def owns(self, t: Tensor) -> bool:
        return id(t) in self._outputs

    def replay(self) -> list[np.ndarray]:
        """Recompute every recorded node from its inputs, in order.

        Returns the recomputed output arrays; recorded values are left as
        they were.
        """
        fresh: dict[int, np.ndarray] = {}
        outs = []
        for node in self.nodes:
            args = [fresh.get(id(t), t.data) for t in node.inputs]
            val = node.forward(*args)
            fresh[id(node.output)] = val
            outs.append(val)
        return outs


def active_tape() -> Tape | None:
    return Tape._stack[-1] if Tape._stack else None


def no_grad():
    """Context that suspends recording (an empty tape that is never used)."""
    return _NoGrad()


class _NoGrad:
    def __enter__(self):
        Tape._stack.append(None)  # type: ignore[arg-type]

    def __exit__(self, *exc):
        Tape._stack.pop()


def _apply(op: str, forward, backward, *inputs: Tensor) -> Tensor:
    out = Tensor._wrap(forward(*[t.data for t in inputs]))
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, inputs, out, forward, backward)
        tape.record(out.node)
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Populate ``.grad`` on every leaf reached from ``loss``.

    Returns a map from leaf tensor to its gradient. Leaves that appear on
    the tape with ``requires_grad`` but receive no gradient get zeros.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.owns(loss):
        raise ContractError("loss was not produced on this tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        for t in node.inputs:
            if t.requires_grad and t.node is None:
                leaves.setdefault(id(t), t)
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        args = [t.data for t in node.inputs]
        in_grads = node.backward(g, node.output.data, *args)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    result: dict[Tensor, np.ndarray] = {}
    for key, leaf in leaves.items():
        g = grads.get(key)
        if g is None:
            g = np.zeros_like(leaf.data)
        leaf.grad = g
        result[leaf] = g
    return result


def _need(shape_ok: bool, op: str, *shapes) -> None:
    if not shape_ok:
        raise DimensionError(f"{op}: incompatible shapes {', '.join(map(str, shapes))}")


# -- primitive operations -------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _need(a.data.ndim == 2 and b.data.ndim == 2 and a.shape[1] == b.shape[0],
          "matmul", a.shape, b.shape)

    def bwd(g, out, av, bv):
        return kernels.matmul(g, bv.T), kernels.matmul(av.T, g)

    return _apply("matmul", kernels.matmul, bwd, a, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a row vector added to each row of ``a``."""
    if a.shape == b.shape:
        return _apply("add", np.add, lambda g, out, av, bv: (g, g), a, b)
    _need(a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1],
          "add", a.shape, b.shape)
    return _apply("add_row", np.add, lambda g, out, av, bv: (g, g.sum(axis=0)), a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        return _apply("sub", np.subtract, lambda g, out, av, bv: (g, -g), a, b)
    _need(a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1],
          "sub", a.shape, b.shape)
    return _apply("sub_row", np.subtract, lambda g, out, av, bv: (g, -g.sum(axis=0)), a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; ``b`` may be a row vector scaling each row of ``a``."""
    if a.shape == b.shape:
        return _apply("mul", np.multiply, lambda g, out, av, bv: (g * bv, g * av), a, b)
    _need(a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1],
          "mul", a.shape, b.shape)
    return _apply("mul_row", np.multiply,
                  lambda g, out, av, bv: (g * bv, (g * av).sum(axis=0)), a, b)


def scale(a: Tensor, c: float) -> Tensor:
    return _apply("scale", lambda av: av * c, lambda g, out, av: (g * c,), a)


def relu(a: Tensor) -> Tensor:
    return _apply("relu", lambda av: np.maximum(av, 0.0),
                  lambda g, out, av: (g * (av > 0.0),), a)


def exp(a: Tensor) -> Tensor:
    return _apply("exp", np.exp, lambda g, out, av: (g * out,), a)


def log(a: Tensor) -> Tensor:
    return _apply("log", np.log, lambda g, out, av: (g / av,), a)


def log_sigmoid(a: Tensor) -> Tensor:
    """log(sigmoid(a)) computed without overflow."""

    def fwd(av):
        return -np.logaddexp(0.0, -av)

    def bwd(g, out, av):
        # d/da log sigmoid(a) = sigmoid(-a)
        return (g * np.exp(-np.logaddexp(0.0, av)),)

    return _apply("log_sigmoid", fwd, bwd, a)


def sum(a: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    shape = a.shape

    def bwd(g, out, av):
        if axis is None:
            return (np.full(shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _apply("sum", lambda av: av.sum(axis=axis), bwd, a)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    if a.data.size == 0:
        raise DimensionError("mean: empty tensor")
    n = a.data.size if axis is None else a.shape[axis]
    return scale(sum(a, axis), 1.0 / n)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(tensors)
    ref = ts[0].shape
    for t in ts[1:]:
        _need(t.data.ndim == len(ref)
              and all(t.shape[i] == ref[i] for i in range(len(ref)) if i != axis),
              "concat", ref, t.shape)
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bwd(g, out, *vals):
        return tuple(np.split(g, bounds, axis=axis))

    return _apply("concat", lambda *vals: np.concatenate(vals, axis=axis), bwd, *ts)


def transpose(a: Tensor) -> Tensor:
    _need(a.data.ndim == 2, "transpose", a.shape)
    return _apply("transpose", lambda av: np.ascontiguousarray(av.T),
                  lambda g, out, av: (g.T,), a)


def log_softmax(a: Tensor) -> Tensor:
    """Row-wise log-softmax of a 2-D tensor."""
    _need(a.data.ndim == 2 and a.shape[1] > 0, "log_softmax", a.shape)

    def bwd(g, out, av):
        return (g - np.exp(out) * g.sum(axis=1, keepdims=True),)

    return _apply("log_softmax", kernels.log_softmax, bwd, a)


def softmax(a: Tensor) -> Tensor:
    return exp(log_softmax(a))


def sq_distance(a: Tensor, b: Tensor) -> Tensor:
    """Per-row squared Euclidean distance ``||a_i - b_i||^2``."""
    _need(a.data.ndim == 2 and a.shape == b.shape, "sq_distance", a.shape, b.shape)

    def bwd(g, out, av, bv):
        d = 2.0 * g[:, None] * (av - bv)
        return d, -d

    return _apply("sq_distance", kernels.row_sqdist, bwd, a, b)


def distance(a: Tensor, b: Tensor) -> Tensor:
    """Per-row Euclidean distance ``||a_i - b_i||_2``.

    The subgradient at zero distance is taken as zero.
    """
    _need(a.data.ndim == 2 and a.shape == b.shape, "distance", a.shape, b.shape)

    def fwd(av, bv):
        return np.sqrt(kernels.row_sqdist(av, bv))

    def bwd(g, out, av, bv):
        safe = np.where(out > 0.0, out, 1.0)
        coef = np.where(out > 0.0, g / safe, 0.0)
        d = coef[:, None] * (av - bv)
        return d, -d

    return _apply("distance", fwd, bwd, a, b)


def take(a: Tensor, index) -> Tensor:
    """Pick ``a[i, index[i]]`` for every row ``i``."""
    idx = np.asarray(index, dtype=np.int64)
    _need(a.data.ndim == 2 and idx.shape == (a.shape[0],), "take", a.shape, idx.shape)
    rows = np.arange(a.shape[0])

    def bwd(g, out, av):
        full = np.zeros_like(av)
        full[rows, idx] = g
        return (full,)

    return _apply("take", lambda av: av[rows, idx], bwd, a)


def gather_rows(a: Tensor, index) -> Tensor:
    """Select rows ``a[index]`` (embedding lookup)."""
    idx = np.asarray(index, dtype=np.int64)
    _need(a.data.ndim == 2 and idx.ndim == 1, "gather_rows", a.shape, idx.shape)

    def bwd(g, out, av):
        full = np.zeros_like(av)
        np.add.at(full, idx, g)
        return (full,)

    return _apply("gather_rows", lambda av: av[idx], bwd, a)
