"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Every differentiable primitive appends one record to the active :class:`Tape`
when at least one operand requires a gradient. :func:`backward` replays the
tape in reverse recording order, visiting each record once, then clears it.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    pass


class Tape:
    """Ordered record of primitive operations for one backward pass."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __len__(self):
        return len(self.records)

    def record(self, out, inputs, grad_fn):
        self.records.append((out, inputs, grad_fn))
        out._tape = self

    def clear(self):
        self.records.clear()


_tape_stack: list[Tape] = [Tape()]
_grad_enabled = [True]


def current_tape() -> Tape:
    return _tape_stack[-1]


@contextlib.contextmanager
def new_tape():
    """Record into a fresh tape for the duration of the block."""
    tape = Tape()
    _tape_stack.append(tape)
    try:
        yield tape
    finally:
        _tape_stack.pop()


@contextlib.contextmanager
def no_grad():
    prev = _grad_enabled[0]
    _grad_enabled[0] = False
    try:
        yield
    finally:
        _grad_enabled[0] = prev


def _check_finite(arr, op):
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite value produced by {op}")


def _unbroadcast(grad, shape):
    # sum out axes introduced or stretched by numpy broadcasting
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._tape = None

    # -- basic protocol -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return mul(as_tensor(other), reciprocal(self))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return index(self, idx)

    # -- method forms ---------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def max(self, axis=None):
        return tmax(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def abs(self):
        return tabs(self)

    def exp(self):
        return exp(self)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, inputs: Sequence[Tensor], grad_fn, op):
    _check_finite(data, op)
    needs = _grad_enabled[0] and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        current_tape().record(out, tuple(inputs), grad_fn)
    return out


# ---------------------------------------------------------------------------
# primitives; each grad_fn maps the output gradient to per-input gradients
# ---------------------------------------------------------------------------

def _broadcast_check(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
                 "mul")


def reciprocal(a):
    if np.any(a.data == 0):
        raise NonFiniteError("division by zero")
    out = 1.0 / a.data
    return _make(out, (a,), lambda g: (-g * out * out,), "reciprocal")


def power(a, p):
    p = float(p)
    ad = a.data
    return _make(ad ** p, (a,), lambda g: (g * p * ad ** (p - 1.0),), "power")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not conform")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def tsum(a, axis=None, keepdims=False):
    shape = a.shape

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), grad_fn, "sum")


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def tmax(a, axis=None):
    """Max reduction; ties resolve to the lowest index."""
    ad = a.data
    if axis is None:
        flat = int(np.argmax(ad))
        out = ad.reshape(-1)[flat]

        def grad_fn(g):
            full = np.zeros(ad.size)
            full[flat] = g
            return (full.reshape(ad.shape),)

        return _make(np.asarray(out), (a,), grad_fn, "max")
    idx = np.expand_dims(np.argmax(ad, axis=axis), axis)
    out = np.take_along_axis(ad, idx, axis=axis).squeeze(axis)

    def grad_fn(g):
        full = np.zeros_like(ad)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _make(out, (a,), grad_fn, "max")


def tabs(a):
    ad = a.data
    return _make(np.abs(ad), (a,), lambda g: (g * np.sign(ad),), "abs")


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    ad = a.data
    if np.any(ad <= 0):
        raise NonFiniteError("log of non-positive value")
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def sigmoid(a):
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a):
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a):
    pos = a.data > 0
    return _make(a.data * pos, (a,), lambda g: (g * pos,), "relu")


def elu(a, alpha=1.0):
    ad = a.data
    neg_part = alpha * np.expm1(np.minimum(ad, 0.0))
    out = np.where(ad > 0, ad, neg_part)
    return _make(out, (a,), lambda g: (g * np.where(ad > 0, 1.0, neg_part + alpha),), "elu")


def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), grad_fn, "softmax")


def reshape(a, shape):
    old = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _make(data, (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a, axes=None):
    inv = None if axes is None else np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),), "transpose")


def index(a, idx):
    """Basic or advanced indexing (slices, integer arrays)."""
    shape = a.shape

    def grad_fn(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), grad_fn, "index")


def take_along(a, indices, axis=-1):
    """Differentiable ``np.take_along_axis``."""
    indices = np.asarray(indices)
    ad = a.data

    def grad_fn(g):
        full = np.zeros_like(ad)
        # accumulate explicitly: indices may repeat
        idx = list(np.indices(indices.shape, sparse=True))
        idx[axis] = indices
        np.add.at(full, tuple(idx), g)
        return (full,)

    return _make(np.take_along_axis(ad, indices, axis=axis), (a,), grad_fn, "take_along")


def concat(tensors: Iterable[Tensor], axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make(data, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


def stack(tensors: Iterable[Tensor], axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def grad_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make(data, tensors, grad_fn, "stack")


def where(cond, a, b):
    cond = np.asarray(cond, dtype=bool)
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(np.where(cond, a.data, b.data), (a, b),
                 lambda g: (_unbroadcast(g * cond, sa), _unbroadcast(g * ~cond, sb)),
                 "where")


def less_mask(a, b) -> np.ndarray:
    """Elementwise ``a < b`` as a constant 0/1 array (no gradient)."""
    av = a.data if isinstance(a, Tensor) else np.asarray(a)
    bv = b.data if isinstance(b, Tensor) else np.asarray(b)
    return (av < bv).astype(np.float64)


# ---------------------------------------------------------------------------

def backward(loss: Tensor):
    """Populate ``.grad`` on every requires-grad tensor reachable from ``loss``.

    The tape that recorded ``loss`` is consumed and cleared.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = loss._tape or current_tape()
    pending = {id(loss): np.ones_like(loss.data)}
    for out, inputs, grad_fn in reversed(tape.records):
        g = pending.pop(id(out), None)
        if g is None:
            continue
        out.grad = g
        for inp, gi in zip(inputs, grad_fn(g)):
            if not inp.requires_grad:
                continue
            if inp._tape is None:  # leaf
                inp.grad = gi.copy() if inp.grad is None else inp.grad + gi
            else:
                key = id(inp)
                pending[key] = gi if key not in pending else pending[key] + gi
    tape.clear()
