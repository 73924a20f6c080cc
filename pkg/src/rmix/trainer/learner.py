"""Centralized learner: CVaR TD loss, gated quantile-regression updates,
target snapshots and decentralized action selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..agent import AgentNet, agent_inputs, select_action
from ..autodiff import (
    Adam, Module, Tensor, backward, clip_grad_norm, concat, new_tape, no_grad, stack,
    take_along,
)
from ..config import RunConfig
from ..distributional import cvar_batch, tail_count, tail_counts
from ..mixer import AdditiveMixer, MonotonicMixer
from ..risk import RiskPredictor, level_indices
from .buffer import EpisodeBatch
from .losses import masked_mse, quantile_regression_loss, td_target


@dataclass
class TargetBundle:
    """Value-copied snapshot of the live networks."""

    agent: AgentNet
    predictor: Optional[RiskPredictor]
    mixer: Module

    def state_dict(self):
        out = {}
        for prefix, mod in (("agent", self.agent), ("predictor", self.predictor),
                            ("mixer", self.mixer)):
            if mod is not None:
                out.update({f"{prefix}.{k}": v for k, v in mod.state_dict().items()})
        return out


def sync_target(agent, predictor, mixer) -> TargetBundle:
    def frozen(mod):
        if mod is None:
            return None
        snap = mod.clone()
        for p in snap.parameters():
            p.requires_grad = False
            p.grad = None
        return snap

    snap = TargetBundle(frozen(agent), frozen(predictor), frozen(mixer))
    return snap


@dataclass
class QrGate:
    period: int = 50
    threshold: float = 0.35
    armed: bool = False

    def observe(self, success_rate: float):
        if success_rate >= self.threshold:
            self.armed = True

    def ready(self, train_step: int) -> bool:
        return self.armed and train_step % self.period == 0


def _trim(batch: EpisodeBatch) -> EpisodeBatch:
    """Drop trailing time steps that are padding in every episode."""
    t_eff = int(batch.filled.sum(axis=1).max())
    if t_eff == batch.max_t:
        return batch
    if t_eff == 0:
        raise ValueError("empty batch: no unmasked steps")
    return EpisodeBatch(batch.obs[:, :t_eff + 1], batch.state[:, :t_eff + 1],
                        batch.avail[:, :t_eff + 1], batch.actions[:, :t_eff],
                        batch.reward[:, :t_eff], batch.terminated[:, :t_eff],
                        batch.filled[:, :t_eff])


class Learner:
    def __init__(self, spec, config: RunConfig, rng=None):
        self.spec = spec
        self.config = config
        rng = np.random.default_rng(config.seed) if rng is None else rng
        n, a, m = spec.n_agents, spec.n_actions, config.n_atoms
        self.input_dim = spec.obs_dim + a + n
        self.agent = AgentNet(self.input_dim, a, m, config.rnn_hidden_dim, rng)
        self.static_alpha = config.static_alpha
        self.predictor = None
        if self.static_alpha is None:
            self.predictor = RiskPredictor(self.input_dim, a, m, config.n_levels,
                                           config.chunk_dim, config.predictor_hidden_dim, rng)
        if config.mixer == "monotonic":
            self.mixer = MonotonicMixer(n, spec.state_dim, config.mixing_embed_dim,
                                        config.hypernet_embed_dim, rng=rng)
        else:
            self.mixer = AdditiveMixer()
        self.target = sync_target(self.agent, self.predictor, self.mixer)
        self.optimizer = Adam(self.td_parameters(), lr=config.lr)
        self.qr_optimizer = Adam(self.agent.parameters(), lr=config.lr)
        self.gate = QrGate(config.qr_period, config.qr_threshold)
        self.train_steps = 0
        self.target_syncs = 0

    # -- parameter groups -----------------------------------------------
    def modules(self):
        out = {"agent": self.agent, "mixer": self.mixer}
        if self.predictor is not None:
            out["predictor"] = self.predictor
        return out

    def td_parameters(self):
        params = self.agent.parameters() + self.mixer.parameters()
        if self.predictor is not None:
            params += self.predictor.parameters()
        return params

    # -- risk levels ----------------------------------------------------
    def _levels(self, predictor, atoms, x, hp):
        """Tail counts and alpha values for each row; advances predictor state."""
        m, big_k = self.config.n_atoms, self.config.n_levels
        rows = atoms.shape[0]
        if predictor is None:
            count = tail_count(self.static_alpha, m)
            return np.full(rows, count), np.full(rows, self.static_alpha), hp
        probs, hp = predictor(atoms, x, hp)
        k = level_indices(probs)
        return tail_counts(k, big_k, m), k / big_k, hp

    def _init_hidden(self, agent, predictor, rows):
        hp = predictor.init_hidden(rows) if predictor is not None else None
        return agent.init_hidden(rows), hp

    # -- decentralized execution ----------------------------------------
    def initial_hidden(self):
        return self._init_hidden(self.agent, self.predictor, self.spec.n_agents)

    def policy_values(self, obs, last_actions, hidden):
        """Per-agent CVaR for every action, the alphas used, and next hidden state."""
        x = agent_inputs(obs[None], np.asarray(last_actions)[None], self.spec.n_actions)[0]
        h, hp = hidden
        with no_grad():
            atoms, h = self.agent(Tensor(x), h)
            counts, alphas, hp = self._levels(self.predictor, atoms, x, hp)
        return cvar_batch(atoms.data, counts), alphas, (h, hp), atoms.data

    def act(self, obs, last_actions, hidden, avail, epsilon, rng):
        values, alphas, hidden, _ = self.policy_values(obs, last_actions, hidden)
        actions = np.array([select_action(values[i], epsilon, rng, avail[i])
                            for i in range(self.spec.n_agents)])
        return actions, alphas, hidden

    # -- centralized losses ---------------------------------------------
    def _target_pass(self, batch: EpisodeBatch, x):
        """Target-network CVaR tables and atoms for every decision point."""
        b, t_max, n = batch.actions.shape
        rows = b * n
        tgt = self.target
        h, hp = self._init_hidden(tgt.agent, tgt.predictor, rows)
        tables, atoms_seq = [], []
        with no_grad():
            for t in range(t_max + 1):
                xt = x[:, t].reshape(rows, -1)
                atoms, h = tgt.agent(Tensor(xt), h)
                counts, _, hp = self._levels(tgt.predictor, atoms, xt, hp)
                tables.append(cvar_batch(atoms.data, counts))
                atoms_seq.append(atoms.data)
        return tables, atoms_seq

    def td_loss(self, batch: EpisodeBatch) -> Tensor:
        batch = _trim(batch)
        cfg = self.config
        b, t_max, n = batch.actions.shape
        a = self.spec.n_actions
        rows = b * n
        x = agent_inputs(batch.obs, batch.last_actions(), a)

        h, hp = self._init_hidden(self.agent, self.predictor, rows)
        c_tot = []
        for t in range(t_max):
            xt = x[:, t].reshape(rows, -1)
            atoms, h = self.agent(Tensor(xt), h)
            counts, _, hp = self._levels(self.predictor, atoms, xt, hp)
            c_all = cvar_batch(atoms, counts)
            chosen = take_along(c_all, batch.actions[:, t].reshape(rows, 1), axis=1)
            c_tot.append(self.mixer(chosen.reshape(b, n), Tensor(batch.state[:, t])))
        c_tot = stack(c_tot, axis=1)

        tables, _ = self._target_pass(batch, x)
        next_max = np.zeros((b, t_max))
        with no_grad():
            for t in range(t_max):
                avail = batch.avail[:, t + 1].reshape(rows, a)
                best = np.where(avail, tables[t + 1], -np.inf).max(axis=1).reshape(b, n)
                next_max[:, t] = self.target.mixer(Tensor(best), Tensor(batch.state[:, t + 1])).data
        y = td_target(batch.reward, batch.terminated, next_max, cfg.gamma)
        return masked_mse(c_tot, y, batch.filled)

    def qr_loss(self, batch: EpisodeBatch) -> Tensor:
        """Quantile regression of each agent's chosen-action atoms onto
        ``C_i + gamma * Z_i'`` with C_i and Z_i' held constant."""
        pred, target, weights = self.qr_terms(batch)
        return quantile_regression_loss(pred, target, weights, self.config.qr_kappa)

    def qr_terms(self, batch: EpisodeBatch):
        """(sorted predicted atoms (R, M) Tensor, constant targets (R, M), row weights)."""
        batch = _trim(batch)
        cfg = self.config
        b, t_max, n = batch.actions.shape
        a, m = self.spec.n_actions, cfg.n_atoms
        rows = b * n
        x = agent_inputs(batch.obs, batch.last_actions(), a)
        tables, tgt_atoms = self._target_pass(batch, x)

        h, hp = self._init_hidden(self.agent, self.predictor, rows)
        preds, targets, weights = [], [], []
        denom = n * batch.filled.sum()
        for t in range(t_max):
            xt = x[:, t].reshape(rows, -1)
            atoms, h = self.agent(Tensor(xt), h)
            with no_grad():
                counts, _, hp = self._levels(self.predictor, atoms, xt, hp)
            act = batch.actions[:, t].reshape(rows)
            chosen_c = cvar_batch(atoms.data, counts)[np.arange(rows), act]
            pick = np.broadcast_to(act[:, None, None], (rows, 1, m))
            pred = take_along(atoms, pick, axis=1).reshape(rows, m)
            pred = take_along(pred, np.argsort(pred.data, axis=1, kind="stable"), axis=1)

            avail = batch.avail[:, t + 1].reshape(rows, a)
            nxt = np.argmax(np.where(avail, tables[t + 1], -np.inf), axis=1)
            z_next = tgt_atoms[t + 1][np.arange(rows), nxt]
            cont = np.repeat(1.0 - batch.terminated[:, t], n)
            targets.append(chosen_c[:, None] + cfg.gamma * cont[:, None] * z_next)
            weights.append(np.repeat(batch.filled[:, t], n) / denom)
            preds.append(pred)
        return concat(preds, axis=0), np.concatenate(targets), np.concatenate(weights)

    # -- optimization ---------------------------------------------------
    def train_step(self, batch: EpisodeBatch) -> dict:
        cfg = self.config
        params = self.td_parameters()
        self.optimizer.zero_grad()
        with new_tape():
            loss = self.td_loss(batch)
            backward(loss)
        raw_norm = clip_grad_norm(params, cfg.grad_clip)
        self.optimizer.step()
        self.train_steps += 1
        out = {"td_loss": loss.item(), "grad_norm_raw": raw_norm,
               "grad_norm": min(raw_norm, cfg.grad_clip), "qr_loss": None}

        if cfg.use_qr and self.gate.ready(self.train_steps):
            self.qr_optimizer.zero_grad()
            with new_tape():
                qr = self.qr_loss(batch)
                backward(qr)
            clip_grad_norm(self.agent.parameters(), cfg.grad_clip)
            self.qr_optimizer.step()
            out["qr_loss"] = qr.item()

        if self.train_steps % cfg.target_update_interval == 0:
            self.target = sync_target(self.agent, self.predictor, self.mixer)
            self.target_syncs += 1
        return out

    # -- persistence ----------------------------------------------------
    def state_dict(self):
        out = {}
        for name, mod in self.modules().items():
            out.update({f"live.{name}.{k}": v for k, v in mod.state_dict().items()})
        out.update({f"target.{k}": v for k, v in self.target.state_dict().items()})
        out.update({f"optim.td.{k}": v for k, v in self.optimizer.state_dict().items()})
        out.update({f"optim.qr.{k}": v for k, v in self.qr_optimizer.state_dict().items()})
        out["counters.train_steps"] = np.array(self.train_steps)
        out["counters.target_syncs"] = np.array(self.target_syncs)
        out["gate.armed"] = np.array(int(self.gate.armed))
        return out

    def load_state_dict(self, state):
        def section(prefix):
            return {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}

        for name, mod in self.modules().items():
            mod.load_state_dict(section(f"live.{name}."))
        for name in ("agent", "predictor", "mixer"):
            mod = getattr(self.target, name)
            if mod is not None:
                mod.load_state_dict(section(f"target.{name}."))
        self.optimizer.load_state_dict(section("optim.td."))
        self.qr_optimizer.load_state_dict(section("optim.qr."))
        self.train_steps = int(state["counters.train_steps"])
        self.target_syncs = int(state["counters.target_syncs"])
        self.gate.armed = bool(int(state["gate.armed"]))
