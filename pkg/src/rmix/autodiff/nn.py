"""Small layer library on top of the tape: linear maps and a GRU cell."""
from __future__ import annotations

import copy

import numpy as np

from .tensor import ShapeError, Tensor, concat, sigmoid, tanh


class Module:
    """Parameter container. Parameters are discovered from attributes in
    assignment order, which fixes the flattening order used by checkpoints
    and optimizers."""

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise KeyError(f"state mismatch: missing={missing} unexpected={extra}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ShapeError(f"{name}: expected {p.shape}, got {arr.shape}")
            p.data = arr.copy()

    def clone(self):
        """Deep value copy; later updates to either side are independent."""
        return copy.deepcopy(self)

    def num_parameters(self):
        return sum(p.size for p in self.parameters())


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng):
        bound = 1.0 / np.sqrt(in_dim)
        self.weight = Tensor(_uniform(rng, bound, (in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(_uniform(rng, bound, (out_dim,)), requires_grad=True)

    @property
    def in_dim(self):
        return self.weight.shape[0]

    @property
    def out_dim(self):
        return self.weight.shape[1]

    def __call__(self, x):
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"Linear expects last dim {self.in_dim}, got {x.shape}")
        return x @ self.weight + self.bias


class GRUCell(Module):
    """Gated recurrent cell.

        r  = sigmoid(x W_xr + b_xr + h W_hr + b_hr)
        z  = sigmoid(x W_xz + b_xz + h W_hz + b_hz)
        n  = tanh(x W_xn + b_xn + r * (h W_hn + b_hn))
        h' = (1 - z) * n + z * h

    The three gates are stored fused along the output axis in (r, z, n) order.
    """

    def __init__(self, in_dim, hidden_dim, rng):
        bound = 1.0 / np.sqrt(hidden_dim)
        self.w_x = Tensor(_uniform(rng, bound, (in_dim, 3 * hidden_dim)), requires_grad=True)
        self.b_x = Tensor(_uniform(rng, bound, (3 * hidden_dim,)), requires_grad=True)
        self.w_h = Tensor(_uniform(rng, bound, (hidden_dim, 3 * hidden_dim)), requires_grad=True)
        self.b_h = Tensor(_uniform(rng, bound, (3 * hidden_dim,)), requires_grad=True)
        self.hidden_dim = hidden_dim

    def __call__(self, x, h):
        hd = self.hidden_dim
        if x.ndim != 2 or x.shape[1] != self.w_x.shape[0]:
            raise ShapeError(f"GRU input must be (batch, {self.w_x.shape[0]}), got {x.shape}")
        if h.shape != (x.shape[0], hd):
            raise ShapeError(f"GRU hidden must be ({x.shape[0]}, {hd}), got {h.shape}")
        gx = x @ self.w_x + self.b_x
        gh = h @ self.w_h + self.b_h
        r = sigmoid(gx[:, :hd] + gh[:, :hd])
        z = sigmoid(gx[:, hd:2 * hd] + gh[:, hd:2 * hd])
        n = tanh(gx[:, 2 * hd:] + r * gh[:, 2 * hd:])
        return (1.0 - z) * n + z * h

    def init_hidden(self, batch):
        return Tensor(np.zeros((batch, self.hidden_dim)))


class MLP(Module):
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, dims, rng):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = x.relu()
        return x


def one_hot(indices, n):
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros(indices.shape + (n,))
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


__all__ = ["Module", "Linear", "GRUCell", "MLP", "one_hot", "concat"]
