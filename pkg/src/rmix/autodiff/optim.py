from __future__ import annotations

import numpy as np

from .tensor import NonFiniteError


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their joint L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if not np.isfinite(total):
        raise NonFiniteError("non-finite gradient norm")
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return total


class Adam:
    """Adam with bias correction. Parameters without a gradient are skipped
    for that step (their moments are left untouched)."""

    def __init__(self, params, lr=5e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        for p in self.params:
            if p.grad is not None and not np.isfinite(p.grad).all():
                raise NonFiniteError("non-finite gradient passed to Adam")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self):
        out = {"step_count": np.array(self.step_count), "lr": np.array(self.lr)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m.{i}"] = m.copy()
            out[f"v.{i}"] = v.copy()
        return out

    def load_state_dict(self, state):
        self.step_count = int(state["step_count"])
        self.lr = float(state["lr"])
        for i in range(len(self.params)):
            self.m[i] = np.array(state[f"m.{i}"], dtype=np.float64)
            self.v[i] = np.array(state[f"v.{i}"], dtype=np.float64)
