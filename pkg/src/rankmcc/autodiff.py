"""Dense float64 tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy float64 array and remembers how it was produced.
Calling :meth:`Tensor.backward` on a scalar output walks the recorded
operation graph once in reverse topological order and accumulates exact
gradients into every leaf created with ``requires_grad=True``. Graphs are
small (a forward pass of an interaction model plus a loss), so nothing is
pruned or freed eagerly; determinism matters more than speed here.

``finite_diff_grad`` is the independent testing oracle: central differences,
no shared code with the reverse pass.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "tensor",
    "parameter",
    "affine",
    "softmax",
    "logsumexp",
    "sigmoid",
    "softplus",
    "relu",
    "tanh",
    "exp",
    "log",
    "concat",
    "repeat_rows",
    "tile_rows",
    "finite_diff_grad",
]


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite values are not admitted into the graph")
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node in the operation graph: value, parents, and a pullback."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_pullback")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _pullback=None):
        self.data = _as_array(data)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._pullback = _pullback

    # -- introspection ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph construction ----------------------------------------------

    @staticmethod
    def _lift(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._lift(other)
        out = Tensor(self.data + other.data, _parents=(self, other))

        def pull(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        out._pullback = pull
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, _parents=(self,))
        out._pullback = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out = Tensor(self.data * other.data, _parents=(self, other))

        def pull(g):
            return (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            )

        out._pullback = pull
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        out = Tensor(self.data / other.data, _parents=(self, other))

        def pull(g):
            return (
                _unbroadcast(g / other.data, self.shape),
                _unbroadcast(-g * self.data / other.data**2, other.shape),
            )

        out._pullback = pull
        return out

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, exponent: float):
        out = Tensor(self.data**exponent, _parents=(self,))
        out._pullback = lambda g: (g * exponent * self.data ** (exponent - 1),)
        return out

    def __matmul__(self, other):
        other = self._lift(other)
        if self.ndim != 2 or other.ndim != 2:
            raise ValueError(
                f"matmul expects rank-2 operands, got {self.ndim} and {other.ndim}"
            )
        if self.shape[1] != other.shape[0]:
            raise ValueError(f"matmul shape mismatch: {self.shape} @ {other.shape}")
        out = Tensor(self.data @ other.data, _parents=(self, other))

        def pull(g):
            return g @ other.data.T, self.data.T @ g

        out._pullback = pull
        return out

    def sum(self, axis: int | None = None):
        out = Tensor(self.data.sum(axis=axis), _parents=(self,))

        def pull(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g, axis), self.shape).copy(),)

        out._pullback = pull
        return out

    def mean(self, axis: int | None = None):
        n = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), _parents=(self,))
        out._pullback = lambda g: (g.reshape(self.shape),)
        return out

    # -- backward pass -----------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.size != 1:
            raise ValueError("backward requires a scalar output node")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))

        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)

        for node in reversed(order):
            if node._pullback is None:
                continue
            parent_grads = node._pullback(node.grad)
            for parent, pg in zip(node._parents, parent_grads):
                if parent.requires_grad:
                    parent.grad = parent.grad + pg if parent.grad is not None else pg


def tensor(data) -> Tensor:
    """A constant graph node (no gradient tracking)."""
    return Tensor(data)


def parameter(data) -> Tensor:
    """A trainable leaf: gradients accumulate here during backward."""
    return Tensor(data, requires_grad=True)


# -- primitive nonlinearities ------------------------------------------------


def exp(t: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        value = np.exp(t.data)
    out = Tensor(value, _parents=(t,))
    out._pullback = lambda g: (g * out.data,)
    return out


def log(t: Tensor) -> Tensor:
    out = Tensor(np.log(t.data), _parents=(t,))
    out._pullback = lambda g: (g / t.data,)
    return out


def relu(t: Tensor) -> Tensor:
    out = Tensor(np.maximum(t.data, 0.0), _parents=(t,))
    out._pullback = lambda g: (g * (t.data > 0.0),)
    return out


def tanh(t: Tensor) -> Tensor:
    out = Tensor(np.tanh(t.data), _parents=(t,))
    out._pullback = lambda g: (g * (1.0 - out.data**2),)
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(t: Tensor) -> Tensor:
    out = Tensor(_sigmoid(t.data), _parents=(t,))
    out._pullback = lambda g: (g * out.data * (1.0 - out.data),)
    return out


def softplus(t: Tensor) -> Tensor:
    """log(1 + exp(x)) computed without overflow; gradient is sigmoid(x)."""
    out = Tensor(np.logaddexp(0.0, t.data), _parents=(t,))
    out._pullback = lambda g: (g * _sigmoid(t.data),)
    return out


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    """Probability simplex projection along ``axis``, max-subtracted."""
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p, _parents=(t,))

    def pull(g):
        inner = (g * p).sum(axis=axis, keepdims=True)
        return (p * (g - inner),)

    out._pullback = pull
    return out


def logsumexp(t: Tensor, axis: int = -1) -> Tensor:
    """Fused log(sum(exp(x))) along ``axis``; the stable core of cross entropy."""
    m = t.data.max(axis=axis, keepdims=True)
    e = np.exp(t.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = Tensor(np.squeeze(m + np.log(s), axis=axis), _parents=(t,))

    def pull(g):
        return (np.expand_dims(g, axis) * (e / s),)

    out._pullback = pull
    return out


# -- structural ops ------------------------------------------------------------


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    parts = [Tensor._lift(t) for t in tensors]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), _parents=tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def pull(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    out._pullback = pull
    return out


def repeat_rows(t: Tensor, k: int) -> Tensor:
    """Repeat each row of a matrix k times: [r, c] -> [r*k, c]."""
    if t.ndim != 2:
        raise ValueError("repeat_rows expects a rank-2 tensor")
    out = Tensor(np.repeat(t.data, k, axis=0), _parents=(t,))
    r, c = t.shape
    out._pullback = lambda g: (g.reshape(r, k, c).sum(axis=1),)
    return out


def tile_rows(t: Tensor, k: int) -> Tensor:
    """Stack k copies of a matrix: [r, c] -> [k*r, c]."""
    if t.ndim != 2:
        raise ValueError("tile_rows expects a rank-2 tensor")
    out = Tensor(np.tile(t.data, (k, 1)), _parents=(t,))
    r, c = t.shape
    out._pullback = lambda g: (g.reshape(k, r, c).sum(axis=0),)
    return out


def affine(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """weights @ x + bias for a vector x, or x @ weights.T + bias row-wise.

    ``weights`` is [m, d]; ``x`` is a length-d vector or an [N, d] batch.
    """
    x = Tensor._lift(x)
    weights = Tensor._lift(weights)
    bias = Tensor._lift(bias)
    if weights.ndim != 2 or bias.ndim != 1 or weights.shape[0] != bias.shape[0]:
        raise ValueError(
            f"affine expects weights [m,d] and bias [m], got {weights.shape} / {bias.shape}"
        )
    if x.ndim == 1:
        if x.shape[0] != weights.shape[1]:
            raise ValueError(f"affine shape mismatch: {weights.shape} @ {x.shape}")
        return _affine_batch(x.reshape(1, -1), weights, bias).reshape(-1)
    if x.ndim == 2:
        if x.shape[1] != weights.shape[1]:
            raise ValueError(f"affine shape mismatch: {x.shape} vs weights {weights.shape}")
        return _affine_batch(x, weights, bias)
    raise ValueError("affine expects a rank-1 or rank-2 input")


def _affine_batch(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    wt = Tensor(weights.data.T, _parents=(weights,))
    wt._pullback = lambda g: (g.T,)
    return x @ wt + bias


# -- the finite-difference oracle ---------------------------------------------


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``: (f(x+h·e)−f(x−h·e))/2h."""
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        fp = float(f(x))
        xf[i] = orig - h
        fm = float(f(x))
        xf[i] = orig
        flat[i] = (fp - fm) / (2.0 * h)
    return grad
