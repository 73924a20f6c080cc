"""Dynamic risk-level predictor.

The current return atoms (detached) are embedded into K chunks; a recurrent
trajectory encoder produces another K chunks; the chunkwise inner products
are softmaxed into a distribution over the levels 1/K, ..., 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import GRUCell, Linear, Module, Tensor, as_tensor, softmax
from .distributional import RiskLevel, TailMask, mask_from_alpha


@dataclass(frozen=True)
class RiskDecision:
    probs: np.ndarray
    level: RiskLevel
    mask: TailMask


class RiskPredictor(Module):
    def __init__(self, input_dim, n_actions, n_atoms, n_levels=10, chunk_dim=4,
                 hidden_dim=64, rng=None):
        rng = np.random.default_rng(1) if rng is None else rng
        width = n_levels * chunk_dim
        self.f_emb = Linear(n_actions * n_atoms, width, rng)
        self.phi_in = Linear(input_dim, hidden_dim, rng)
        self.phi_rnn = GRUCell(hidden_dim, hidden_dim, rng)
        self.phi_out = Linear(hidden_dim, width, rng)
        self.n_levels = n_levels
        self.chunk_dim = chunk_dim
        self.hidden_dim = hidden_dim

    def init_hidden(self, batch):
        return Tensor(np.zeros((batch, self.hidden_dim)))

    def embed_distribution(self, atoms):
        """(B, A, M) atoms -> (B, K, d) chunks. Atoms enter as constants."""
        flat = atoms.data if isinstance(atoms, Tensor) else np.asarray(atoms, dtype=np.float64)
        flat = Tensor(flat.reshape(flat.shape[0], -1))
        return self.f_emb(flat).reshape(flat.shape[0], self.n_levels, self.chunk_dim)

    def embed_trajectory(self, x, h):
        """One recurrent step over (observation, last action, id) inputs."""
        x = as_tensor(x)
        h = self.phi_rnn(self.phi_in(x).relu(), as_tensor(h))
        chunks = self.phi_out(h).reshape(x.shape[0], self.n_levels, self.chunk_dim)
        return chunks, h

    def __call__(self, atoms, x, h):
        """Returns (level probabilities (B, K), next trajectory hidden state)."""
        dist_chunks = self.embed_distribution(atoms)
        traj_chunks, h = self.embed_trajectory(x, h)
        return alpha_probs(dist_chunks, traj_chunks), h


def alpha_probs(dist_chunks, traj_chunks):
    """Softmax over K of the chunkwise inner products; inputs (B, K, d)."""
    dist_chunks, traj_chunks = as_tensor(dist_chunks), as_tensor(traj_chunks)
    return softmax((dist_chunks * traj_chunks).sum(axis=-1), axis=-1)


def level_indices(probs) -> np.ndarray:
    """1-based argmax level per row; ties resolve to the lowest level."""
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    return np.argmax(p, axis=-1) + 1


def decide(probs, n_atoms: int) -> RiskDecision:
    p = np.asarray(probs.data if isinstance(probs, Tensor) else probs, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("decide() takes a single probability vector")
    level = RiskLevel(int(np.argmax(p)) + 1, p.size)
    return RiskDecision(p, level, mask_from_alpha(level, n_atoms))
