"""A small reverse-mode autodiff engine over dense float64 arrays.

Only the primitives the graph generator needs are provided. Each result
keeps references to its inputs and a closure that pushes gradients back;
:func:`backward` walks that graph once in reverse topological order and
then releases it, so a second call without a fresh forward pass fails.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    pass


class StaleGraphError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "_op", "_stale")

    def __init__(self, value, requires_grad: bool = False, *, _parents=(), _backward=None, _op="leaf"):
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"non-finite values produced by {_op}")
        self.value = value
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = _parents
        self._backward: Callable[[np.ndarray], tuple] | None = _backward
        self._op = _op
        self._stale = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        return float(self.value)

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(value, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, True, _parents=tuple(parents), _backward=backward, _op=op)
    return Tensor(value, _op=op)


def _shape_error(op: str, *shapes) -> ValueError:
    return ValueError(f"{op}: incompatible shapes " + " and ".join(str(tuple(s)) for s in shapes))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.value + b.value
    except ValueError:
        raise _shape_error("add", a.shape, b.shape) from None
    return _result(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def neg(a: Tensor) -> Tensor:
    return _result(-a.value, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.value * b.value
    except ValueError:
        raise _shape_error("mul", a.shape, b.shape) from None
    return _result(out, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)), "mul")


def _logistic(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _logistic(x.value)
    return _result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.value)
    return _result(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def one_minus(x: Tensor) -> Tensor:
    return _result(1.0 - x.value, (x,), lambda g: (-g,), "one_minus")


# -- linear algebra ----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    return _result(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g), "matmul")


def affine(W: Tensor, x: Tensor, b: Tensor | None = None) -> Tensor:
    """``W x + b`` for a vector ``x``, or row-wise ``x W^T + b`` for a matrix."""
    W, x = _as_tensor(W), _as_tensor(x)
    if W.value.ndim != 2 or x.value.ndim not in (1, 2) or x.shape[-1] != W.shape[1]:
        raise _shape_error("affine", W.shape, x.shape)
    if b is not None and b.shape != (W.shape[0],):
        raise _shape_error("affine bias", W.shape, b.shape)
    out = x.value @ W.value.T
    if b is not None:
        out = out + b.value
    xv, Wv = x.value, W.value

    def back(g):
        if xv.ndim == 1:
            gW = np.outer(g, xv)
            gb = g
        else:
            gW = g.T @ xv
            gb = g.sum(axis=0)
        grads = (gW, g @ Wv)
        return grads + (gb,) if b is not None else grads

    parents = (W, x, b) if b is not None else (W, x)
    return _result(out, parents, back, "affine")


# -- structural --------------------------------------------------------------

def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    try:
        out = np.concatenate([x.value for x in xs], axis=axis)
    except ValueError:
        raise _shape_error("concat", *(x.shape for x in xs)) from None
    splits = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _result(out, xs, lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def mean_rows(X: Tensor) -> Tensor:
    if X.value.ndim != 2 or X.shape[0] == 0:
        raise _shape_error("mean_rows", X.shape)
    n = X.shape[0]
    return _result(X.value.mean(axis=0), (X,), lambda g: (np.broadcast_to(g / n, X.shape).copy(),), "mean_rows")


def sum_all(x: Tensor) -> Tensor:
    return _result(np.asarray(x.value.sum()), (x,), lambda g: (np.full(x.shape, float(g)),), "sum")


def take_rows(X: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=int)
    if X.value.ndim != 2:
        raise _shape_error("take_rows", X.shape)

    def back(g):
        gx = np.zeros(X.shape)
        np.add.at(gx, idx, g)
        return (gx,)

    return _result(X.value[idx], (X,), back, "take_rows")


def take(x: Tensor, i: int) -> Tensor:
    """Row ``i`` of a matrix as a vector."""
    return reshape(take_rows(x, [i]), (x.shape[1],))


def segment_sum(X: Tensor, segments, n_segments: int) -> Tensor:
    """Sum rows of ``X`` into ``n_segments`` buckets given by ``segments``."""
    segments = np.asarray(segments, dtype=int)
    if X.value.ndim != 2 or len(segments) != X.shape[0]:
        raise _shape_error("segment_sum", X.shape, segments.shape)
    out = np.zeros((n_segments, X.shape[1]))
    np.add.at(out, segments, X.value)
    return _result(out, (X,), lambda g: (g[segments],), "segment_sum")


def tile_rows(x: Tensor, n: int) -> Tensor:
    if x.value.ndim != 1:
        raise _shape_error("tile_rows", x.shape)
    return _result(np.tile(x.value, (n, 1)), (x,), lambda g: (g.sum(axis=0),), "tile_rows")


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        out = x.value.reshape(shape)
    except ValueError:
        raise _shape_error("reshape", old, shape) from None
    return _result(out, (x,), lambda g: (g.reshape(old),), "reshape")


# -- losses ------------------------------------------------------------------

def masked_log_softmax(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Log-probabilities with masked entries at ``-inf``. ``mask`` marks hidden entries."""
    z = np.array(logits, dtype=np.float64)
    if mask is not None:
        z[mask] = -np.inf
    top = z.max()
    if not np.isfinite(top):
        raise ValueError("every entry is masked")
    shifted = z - top
    return shifted - np.log(np.exp(shifted).sum())


def masked_softmax(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    return np.exp(masked_log_softmax(logits, mask))


def softmax_cross_entropy(logits: Tensor, target: int, mask=None) -> Tensor:
    """``-log softmax(logits)[target]`` with masked entries given probability 0.

    ``mask`` is a boolean array where ``True`` hides an entry.
    """
    if logits.value.ndim != 1 or logits.shape[0] < 1:
        raise _shape_error("softmax_cross_entropy", logits.shape)
    k = logits.shape[0]
    if not 0 <= target < k:
        raise IndexError(f"target {target} out of range for {k} classes")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (k,):
            raise _shape_error("softmax_cross_entropy mask", logits.shape, mask.shape)
        if mask.all():
            raise ValueError("every entry is masked")
        if mask[target]:
            raise ValueError(f"target {target} is masked")
    logp = masked_log_softmax(logits.value, mask)
    p = np.exp(logp)

    def back(g):
        d = p.copy()
        d[target] -= 1.0
        return (g * d,)

    return _result(np.asarray(-logp[target]), (logits,), back, "softmax_cross_entropy")


# -- recurrent cell ----------------------------------------------------------

GRU_PARAM_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def gru_cell(x: Tensor, h: Tensor, params) -> Tensor:
    """Gated recurrent unit step, row-wise when ``x`` and ``h`` are matrices.

    ``params`` maps ``W_*`` (hidden x input), ``U_*`` (hidden x hidden) and
    ``b_*`` (hidden) for the update gate ``z``, reset gate ``r`` and
    candidate ``h``::

        z = sigmoid(W_z x + U_z h + b_z)
        r = sigmoid(W_r x + U_r h + b_r)
        c = tanh(W_h x + U_h (r * h) + b_h)
        h' = (1 - z) * h + z * c
    """
    P = params
    if x.value.ndim != h.value.ndim or (x.value.ndim == 2 and x.shape[0] != h.shape[0]):
        raise _shape_error("gru_cell", x.shape, h.shape)
    z = sigmoid(affine(P["W_z"], x, P["b_z"]) + affine(P["U_z"], h))
    r = sigmoid(affine(P["W_r"], x, P["b_r"]) + affine(P["U_r"], h))
    c = tanh(affine(P["W_h"], x, P["b_h"]) + affine(P["U_h"], r * h))
    return one_minus(z) * h + z * c


# -- gradient pass and update ------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        if node._stale:
            raise StaleGraphError("backward already ran on this graph; run the forward pass again")
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it."""
    if loss.size != 1 or loss.value.ndim > 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires grad")
    order = _topo_order(loss)
    grads = {id(loss): np.ones(loss.shape)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if node._backward is None:
            if g is not None:
                node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        if g is not None:
            for parent, pg in zip(node._parents, node._backward(g)):
                if parent.requires_grad:
                    key = id(parent)
                    grads[key] = grads[key] + pg if key in grads else pg
        node._parents = ()
        node._backward = None
        node._stale = True


def parameters_grad_norm(params: Iterable[Tensor]) -> float:
    return float(np.sqrt(sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None)))


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Rescale gradients in place so their global norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    params = list(params)
    norm = parameters_grad_norm(params)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


def sgd_step(params: Iterable[Tensor], lr: float) -> None:
    for p in params:
        if p.grad is not None:
            p.value -= lr * p.grad
            p.grad = None
