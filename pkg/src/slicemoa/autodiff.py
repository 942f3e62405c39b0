"""Dense tensors with reverse-mode automatic differentiation.

Deliberately small: float arrays (64-bit by default, 32-bit as a fast path),
the primitives the slice-aware models need, and an implicit tape made of
parent links plus backward closures. ``backward`` topologically sorts the
recorded operations and accumulates gradients into every ``requires_grad``
leaf; gradients keep accumulating across calls until the caller zeroes them
(the trainer does so every step).

Broadcasting is supported only as far as the models use it (a [n,1] or [1,m]
operand against [n,m], and scalars); gradients of broadcast operands are
summed back to their shape.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, NumericError, ParameterError


class Tensor:
    """An array node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"

    # -- backward pass ------------------------------------------------------

    def backward(self):
        """Backpropagate from this scalar through the recorded tape.

        Leaf gradients accumulate across repeated calls; intermediate node
        gradients are reset at the start of each call.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        for node in topo:
            if node._parents:
                node.grad = None
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("tensor/tensor division is not part of this algebra")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False, dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} @ {b.shape} do not agree")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _node(data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _node(a.data.T, (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _node(data, (a,), backward)


def take(a: Tensor, key) -> Tensor:
    """Basic indexing (ints/slices only, so gradient scatter has no duplicates)."""
    a = as_tensor(a)
    data = a.data[key]

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[key] = g
            a._accumulate(buf)

    return _node(data, (a,), backward)


def stack_cols(columns: list[Tensor]) -> Tensor:
    """Stack 1-D [n] (or [n,1]) tensors into an [n,k] matrix."""
    cols = [as_tensor(c) for c in columns]
    data = np.column_stack([c.data.reshape(-1) for c in cols])

    def backward(g):
        for j, c in enumerate(cols):
            if c.requires_grad:
                c._accumulate(g[:, j].reshape(c.data.shape))

    return _node(data, tuple(cols), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0))

    return _node(data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    data = _sigmoid(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * data * (1.0 - data))

    return _node(data, (a,), backward)


def absolute(a) -> Tensor:
    a = as_tensor(a)
    data = np.abs(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.sign(a.data))

    return _node(data, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * data)

    return _node(data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _node(data, (a,), backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# -- reductions ---------------------------------------------------------------


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.data.shape).copy())
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(ge, a.data.shape).copy())

    return _node(data, (a,), backward)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- softmax / losses ---------------------------------------------------------


def softmax(a, axis: int = -1) -> Tensor:
    """Row-wise softmax, shifted by the row max for stability."""
    a = as_tensor(a)
    if np.isnan(a.data).any():
        raise NumericError("softmax: input contains NaN")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * data).sum(axis=axis, keepdims=True)
            a._accumulate(data * (g - dot))

    return _node(data, (a,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if np.isnan(a.data).any():
        raise NumericError("log_softmax: input contains NaN")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    data = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def backward(g):
        if a.requires_grad:
            p = np.exp(data)
            a._accumulate(g - p * g.sum(axis=axis, keepdims=True))

    return _node(data, (a,), backward)


def cross_entropy(logits, target) -> Tensor:
    """Negative log-likelihood of ``target`` under softmax(logits).

    1-D logits with an int target give a scalar; [n,C] logits with an [n]
    target array give the per-row losses. Gradient w.r.t. logits is
    softmax(logits) - onehot(target).
    """
    logits = as_tensor(logits)
    if logits.data.ndim == 1:
        t = int(target)
        C = logits.data.shape[0]
        if not 0 <= t < C:
            raise IndexError(f"cross_entropy: target {t} out of range for {C} classes")
        ls = log_softmax(logits, axis=-1)
        return mul(take(ls, t), -1.0)
    if logits.data.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be 1-D or 2-D, got {logits.shape}")
    targets = np.asarray(target, dtype=np.int64)
    n, C = logits.data.shape
    if targets.shape != (n,):
        raise DimensionError(f"cross_entropy: targets shape {targets.shape} for logits {logits.shape}")
    if targets.min() < 0 or targets.max() >= C:
        raise IndexError(f"cross_entropy: target out of range for {C} classes")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    data = lse - z[np.arange(n), targets]

    def backward(g):
        if logits.requires_grad:
            p = np.exp(z - lse[:, None])
            p[np.arange(n), targets] -= 1.0
            logits._accumulate(p * g[:, None])

    return _node(data, (logits,), backward)


def binary_cross_entropy_with_logits(logits, targets) -> Tensor:
    """Elementwise BCE between sigmoid(logits) and binary targets.

    Computed in the stable form max(x,0) - x*t + log(1+exp(-|x|)); gradient
    w.r.t. logits is sigmoid(logits) - targets.
    """
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=logits.data.dtype)
    if t.shape != logits.data.shape:
        raise DimensionError(f"bce: targets shape {t.shape} vs logits {logits.shape}")
    x = logits.data
    data = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))

    def backward(g):
        if logits.requires_grad:
            logits._accumulate(g * (_sigmoid(x) - t))

    return _node(data, (logits,), backward)


def dropout(a, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p and scale survivors by 1/(1-p).

    Identity in eval mode, so no rescaling is needed at inference.
    """
    a = as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    if rng is None:
        raise ParameterError("dropout: an rng is required in training mode")
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    data = a.data * mask

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _node(data, (a,), backward)


def hard_one_hot(p: Tensor) -> Tensor:
    """One-hot of the row argmax with a straight-through gradient.

    Forward value is exactly one-hot; backward passes the incoming gradient
    through unchanged, i.e. the soft input's gradient is used.
    """
    p = as_tensor(p)
    idx = p.data.argmax(axis=-1)
    data = np.zeros_like(p.data)
    if p.data.ndim == 1:
        data[idx] = 1.0
    else:
        data[np.arange(p.data.shape[0]), idx] = 1.0

    def backward(g):
        if p.requires_grad:
            p._accumulate(g)

    return _node(data, (p,), backward)
