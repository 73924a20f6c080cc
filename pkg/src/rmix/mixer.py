"""Centralized mixers combining per-agent CVaR values into one training scalar."""
from __future__ import annotations

import numpy as np

from .autodiff import Linear, Module, Tensor, as_tensor, elu


class MonotonicMixer(Module):
    """State-conditioned two-layer mixer with nonnegative mixing weights.

    Hypernetworks map the global state to the mixing weights, which pass
    through ``abs`` so that the output is nondecreasing in every agent input.
    """

    def __init__(self, n_agents, state_dim, embed_dim=32, hypernet_dim=64,
                 hypernet_layers=2, activation="elu", rng=None):
        rng = np.random.default_rng(2) if rng is None else rng
        if hypernet_layers not in (1, 2):
            raise ValueError("hypernet_layers must be 1 or 2")
        if activation not in ("elu", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        if hypernet_layers == 1:
            self.hyper_w1 = [Linear(state_dim, n_agents * embed_dim, rng)]
            self.hyper_w2 = [Linear(state_dim, embed_dim, rng)]
        else:
            self.hyper_w1 = [Linear(state_dim, hypernet_dim, rng),
                             Linear(hypernet_dim, n_agents * embed_dim, rng)]
            self.hyper_w2 = [Linear(state_dim, hypernet_dim, rng),
                             Linear(hypernet_dim, embed_dim, rng)]
        self.hyper_b1 = Linear(state_dim, embed_dim, rng)
        self.hyper_v = [Linear(state_dim, embed_dim, rng), Linear(embed_dim, 1, rng)]
        self.n_agents = n_agents
        self.embed_dim = embed_dim
        self.activation = activation

    @staticmethod
    def _run(layers, x):
        for i, layer in enumerate(layers):
            x = layer(x)
            if i < len(layers) - 1:
                x = x.relu()
        return x

    def __call__(self, cvars, states):
        cvars, states = as_tensor(cvars), as_tensor(states)
        b = cvars.shape[0]
        if cvars.shape != (b, self.n_agents):
            raise ValueError(f"expected ({b}, {self.n_agents}) agent values, got {cvars.shape}")
        w1 = self._run(self.hyper_w1, states).abs().reshape(b, self.n_agents, self.embed_dim)
        b1 = self.hyper_b1(states)
        hidden = (cvars.reshape(b, self.n_agents, 1) * w1).sum(axis=1) + b1
        if self.activation == "elu":
            hidden = elu(hidden)
        w2 = self._run(self.hyper_w2, states).abs()
        v = self._run(self.hyper_v, states).reshape(b)
        return (hidden * w2).sum(axis=1) + v


class AdditiveMixer(Module):
    """Plain sum over agents."""

    def __call__(self, cvars, states=None):
        return as_tensor(cvars).sum(axis=1)


def monotonic_mix(cvars, state, mixer: MonotonicMixer) -> float:
    """Single-sample convenience wrapper returning a float."""
    out = mixer(Tensor(np.asarray(cvars, dtype=np.float64)[None]),
                Tensor(np.asarray(state, dtype=np.float64)[None]))
    return float(out.data[0])


def rdn_mix(cvars) -> float:
    return float(np.sum(np.asarray(cvars, dtype=np.float64)))
