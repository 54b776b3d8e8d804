"""Dense tensors with reverse-mode automatic differentiation.

Exactly the primitive set the message-passing models and losses need, on
numpy arrays. The tape is implicit: every op output keeps references to its
parents and a closure that routes upstream gradients; `backward` walks the
graph once in reverse topological order and then frees it, so a second
backward without rebuilding the forward pass raises.

Broadcasting is restricted to leading-dimension expansion: two shapes are
compatible iff one is a suffix of the other. Anything fancier must be made
explicit by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn",
                 "_freed")

    def __init__(self, data, requires_grad: bool = False, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._freed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; everything routes through the module-level primitives.
    def __add__(self, other):
        return add(self, _wrap(other, self))

    def __radd__(self, other):
        return add(_wrap(other, self), self)

    def __mul__(self, other):
        return mul(self, _wrap(other, self))

    def __rmul__(self, other):
        return mul(_wrap(other, self), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, Tensor(-1.0, dtype=self.data.dtype))

    def __sub__(self, other):
        return add(self, -_wrap(other, self))


def _wrap(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=like.data.dtype)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out._parents = parents if out.requires_grad else ()
    out._backward_fn = backward_fn if out.requires_grad else None
    out._freed = False
    return out


def apply_op(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Extension hook for composite modules (e.g. loss-side clamping)."""
    return _node(np.asarray(data), parents, backward_fn)


def _check_suffix_broadcast(sa: tuple[int, ...], sb: tuple[int, ...]) -> None:
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    if small != big[len(big) - len(small):]:
        raise ValueError(f"shapes {sa} and {sb} are not suffix-broadcastable")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def bw(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _node(a.data @ b.data, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_suffix_broadcast(a.shape, b.shape)

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_suffix_broadcast(a.shape, b.shape)

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), bw)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bw(g):
        _accumulate(x, g * mask)

    return _node(np.where(mask, x.data, 0.0), (x,), bw)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def bw(g):
        _accumulate(x, g * y * (1.0 - y))

    return _node(y, (x,), bw)


def log(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, g / x.data)

    return _node(np.log(x.data), (x,), bw)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def bw(g):
        _accumulate(x, g * y)

    return _node(y, (x,), bw)


def square(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, g * 2.0 * x.data)

    return _node(x.data * x.data, (x,), bw)


def absolute(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, g * np.sign(x.data))

    return _node(np.abs(x.data), (x,), bw)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    return _node(np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), bw)


def row_softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError("row_softmax expects a 2-D tensor")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        _accumulate(x, (g - dot) * y)

    return _node(y, (x,), bw)


def gather_rows(x: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise IndexError("gather_rows index out of bounds")

    def bw(g):
        if not x.requires_grad:
            return
        buf = np.zeros_like(x.data)
        np.add.at(buf, idx, g)
        _accumulate(x, buf)

    return _node(x.data[idx], (x,), bw)


def _check_segments(segment_ids, num_segments: int) -> np.ndarray:
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise IndexError("segment id out of bounds")
    return ids


def segment_sum(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    ids = _check_segments(segment_ids, num_segments)
    if ids.shape[0] != x.shape[0]:
        raise ValueError("segment_ids length must match leading dimension")
    out = np.zeros((num_segments,) + x.shape[1:], dtype=x.data.dtype)
    np.add.at(out, ids, x.data)

    def bw(g):
        _accumulate(x, g[ids])

    return _node(out, (x,), bw)


def segment_mean(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    ids = _check_segments(segment_ids, num_segments)
    if ids.shape[0] != x.shape[0]:
        raise ValueError("segment_ids length must match leading dimension")
    counts = np.bincount(ids, minlength=num_segments).astype(x.data.dtype)
    safe = np.where(counts > 0, counts, 1.0)
    total = np.zeros((num_segments,) + x.shape[1:], dtype=x.data.dtype)
    np.add.at(total, ids, x.data)
    shape = (num_segments,) + (1,) * (x.data.ndim - 1)
    out = total / safe.reshape(shape)

    def bw(g):
        _accumulate(x, (g / safe.reshape(shape))[ids])

    return _node(out, (x,), bw)


def reduce_sum(x: Tensor, axis: int | None = None) -> Tensor:
    def bw(g):
        if axis is None:
            _accumulate(x, np.broadcast_to(g, x.shape).copy())
        else:
            _accumulate(x, np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    return _node(x.data.sum(axis=axis), (x,), bw)


def reduce_mean(x: Tensor, axis: int | None = None) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]

    def bw(g):
        if axis is None:
            _accumulate(x, np.broadcast_to(g / n, x.shape).copy())
        else:
            _accumulate(x, np.broadcast_to(np.expand_dims(g, axis) / n,
                                           x.shape).copy())

    return _node(x.data.mean(axis=axis), (x,), bw)


def backward(loss: Tensor) -> None:
    """Propagate gradients from a scalar loss to all requires_grad leaves.

    The op graph is released afterwards; calling backward on the same loss
    again raises.
    """
    if loss.size != 1:
        raise ValueError("backward expects a scalar loss")
    if loss._freed:
        raise RuntimeError("tape already freed; rebuild the forward pass")
    if not loss.requires_grad:
        raise RuntimeError("loss does not require grad")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
    # Release the graph: interior nodes drop closures and their grads.
    for node in topo:
        if node._backward_fn is not None:
            node._backward_fn = None
            node._parents = ()
            if node is not loss:
                node.grad = None
    loss._freed = True


@dataclass
class GradCheckReport:
    max_rel_err: float
    num_checked: int
    passed: bool
    worst: str = ""


def gradcheck(fn, inputs: list[Tensor], h: float = 1e-5,
              tol: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients of scalar-valued `fn` against central
    finite differences. Relative error per element, with an absolute
    fallback below 1e-6 magnitude."""
    for t in inputs:
        t.zero_grad()
    out = fn(*inputs)
    if out.size != 1:
        raise ValueError("gradcheck expects a scalar-valued function")
    backward(out)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy()
                for t in inputs]

    max_rel = 0.0
    worst = ""
    count = 0
    for which, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = fn(*inputs).item()
            flat[i] = orig - h
            down = fn(*inputs).item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            ana = analytic[which].reshape(-1)[i]
            scale = max(abs(numeric), abs(ana))
            if scale < 1e-6:
                err = abs(numeric - ana)
            else:
                err = abs(numeric - ana) / scale
            count += 1
            if err > max_rel:
                max_rel = err
                worst = f"input {which} element {i}: numeric {numeric:.3e} vs analytic {ana:.3e}"
    if math.isnan(max_rel):
        return GradCheckReport(max_rel, count, False, worst or "nan encountered")
    return GradCheckReport(max_rel, count, max_rel < tol, worst)
