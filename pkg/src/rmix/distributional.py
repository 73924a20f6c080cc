"""Dirac-mixture return distributions and their CVaR / VaR operators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, take_along

NEG_INF = -np.inf
_UNIFORM_TOL = 1e-12


@dataclass(frozen=True)
class RiskLevel:
    """Discretized risk level ``alpha = k / K``."""

    k: int
    K: int

    def __post_init__(self):
        if self.K < 1 or not 1 <= self.k <= self.K:
            raise ValueError(f"risk level needs 1 <= k <= K, got k={self.k}, K={self.K}")

    @property
    def alpha(self) -> float:
        return self.k / self.K

    def tail_count(self, m: int) -> int:
        # exact integer floor(k * m / K); avoids float rounding at k/K boundaries
        return max(1, (self.k * m) // self.K)

    @classmethod
    def from_alpha(cls, alpha: float, K: int) -> "RiskLevel":
        k = int(round(alpha * K))
        if not math.isclose(k / K, alpha, abs_tol=1e-9):
            raise ValueError(f"alpha={alpha} is not a multiple of 1/{K}")
        return cls(k, K)


def tail_count(alpha, m: int) -> int:
    """Number of smallest atoms in the tail: ``max(1, floor(alpha * m))``."""
    if isinstance(alpha, RiskLevel):
        return alpha.tail_count(m)
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return max(1, min(m, math.floor(alpha * m + 1e-9)))


def _alpha_value(alpha) -> float:
    a = alpha.alpha if isinstance(alpha, RiskLevel) else float(alpha)
    if not 0.0 < a <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {a}")
    return a


@dataclass
class DiracMixture:
    """M weighted point masses. Probabilities default to uniform 1/M."""

    atoms: np.ndarray
    probs: np.ndarray = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64).reshape(-1)
        m = self.atoms.size
        if m < 1:
            raise ValueError("a mixture needs at least one atom")
        if self.probs is None:
            self.probs = np.full(m, 1.0 / m)
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if self.probs.size != m:
            raise ValueError(f"{m} atoms but {self.probs.size} probabilities")
        if not np.isfinite(self.atoms).all():
            raise ValueError("atoms must be finite")
        if (self.probs < 0).any() or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    @property
    def m(self) -> int:
        return self.atoms.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.ptp(self.probs) <= _UNIFORM_TOL)

    def check_bounds(self, r_max: float, horizon: int):
        bound = r_max * horizon
        if np.abs(self.atoms).max() > bound:
            raise ValueError(f"atoms exceed the return bound +-{bound}")

    def shifted(self, c: float) -> "DiracMixture":
        return DiracMixture(self.atoms + c, self.probs.copy())

    def scaled(self, lam: float) -> "DiracMixture":
        return DiracMixture(self.atoms * lam, self.probs.copy())


@dataclass(frozen=True)
class TailMask:
    bits: np.ndarray = field(repr=False)

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def __len__(self):
        return self.bits.size


def expectation(z: DiracMixture) -> float:
    return float(np.dot(z.probs, z.atoms))


def _tail_positions(z: DiracMixture, alpha) -> np.ndarray:
    """Indices (into ``z.atoms``) of the lower tail, in ascending value order."""
    order = np.argsort(z.atoms, kind="stable")
    if z.is_uniform:
        return order[: tail_count(alpha, z.m)]
    a = _alpha_value(alpha)
    cum = np.cumsum(z.probs[order])
    n = int(np.searchsorted(cum, a - 1e-12, side="left")) + 1
    return order[: min(n, z.m)]


def var_threshold(z: DiracMixture, alpha) -> float:
    """Value at risk: the largest atom of the lower alpha tail."""
    return float(z.atoms[_tail_positions(z, alpha)[-1]])


def cvar(z: DiracMixture, alpha) -> float:
    """Mean of the lower alpha tail, normalized by the tail mass.

    Uniform mixtures keep the ``max(1, floor(alpha * M))`` smallest atoms;
    weighted mixtures keep the shortest ascending prefix whose mass reaches
    alpha. A tail covering every atom returns ``expectation(z)`` exactly.
    """
    tail = _tail_positions(z, alpha)
    if tail.size == z.m:
        return expectation(z)
    p = z.probs[tail]
    return float(np.dot(p, z.atoms[tail]) / p.sum())


def mask_from_alpha(alpha, m: int) -> TailMask:
    if m < 1:
        raise ValueError("mask length must be positive")
    bits = np.zeros(m, dtype=bool)
    bits[: tail_count(alpha, m)] = True
    return TailMask(bits)


def cvar_all_actions(dists, alpha, avail=None) -> np.ndarray:
    """CVaR per action; unavailable actions map to ``-inf``."""
    n = len(dists)
    avail = np.ones(n, dtype=bool) if avail is None else np.asarray(avail, dtype=bool)
    if avail.shape != (n,):
        raise ValueError("availability mask must have one entry per action")
    if not avail.any():
        raise ValueError("no available action")
    return np.array([cvar(z, alpha) if ok else NEG_INF for z, ok in zip(dists, avail)])


# -- batched forms used by the networks -----------------------------------

def tail_mask_matrix(counts, m: int) -> np.ndarray:
    """Rows of prefix masks: ``out[b, j] = j < counts[b]``."""
    counts = np.asarray(counts)
    return (np.arange(m) < counts[..., None]).astype(np.float64)


def tail_counts(k, K: int, m: int) -> np.ndarray:
    """Vectorized ``RiskLevel(k, K).tail_count(m)`` for integer arrays ``k``."""
    return np.maximum(1, (np.asarray(k, dtype=np.int64) * m) // K)


def cvar_batch(atoms, counts):
    """Uniform-probability CVaR over the last axis.

    ``atoms``: Tensor or array of shape (..., A, M); ``counts``: integer array
    broadcastable to (...,) giving the tail size per row. Returns shape (..., A).
    Works on Tensors (differentiable through the sort gather) and on arrays.
    """
    data = atoms.data if isinstance(atoms, Tensor) else np.asarray(atoms, dtype=np.float64)
    m = data.shape[-1]
    counts = np.asarray(counts)
    order = np.argsort(data, axis=-1, kind="stable")
    mask = tail_mask_matrix(counts, m)[..., None, :]
    scale = 1.0 / counts.astype(np.float64)[..., None]
    if isinstance(atoms, Tensor):
        ordered = take_along(atoms, order, axis=-1)
        return (ordered * mask).sum(axis=-1) * scale
    ordered = np.take_along_axis(data, order, axis=-1)
    return (ordered * mask).sum(axis=-1) * scale
