from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, less_mask, where


def td_target(reward, terminated, next_value, gamma):
    """``r + gamma * (1 - terminated) * next_value`` (elementwise on arrays)."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    return np.asarray(reward) + gamma * (1.0 - np.asarray(terminated, dtype=np.float64)) * np.asarray(next_value)


def masked_mse(pred: Tensor, target, mask):
    mask = np.asarray(mask, dtype=np.float64)
    n = mask.sum()
    if n == 0:
        raise ValueError("empty batch: no unmasked steps")
    err = pred - Tensor(np.asarray(target, dtype=np.float64))
    return (err * err * mask).sum() * (1.0 / n)


def huber(nu, kappa=1.0):
    nu = np.asarray(nu, dtype=np.float64)
    a = np.abs(nu)
    return np.where(a <= kappa, 0.5 * nu * nu, kappa * (a - 0.5 * kappa))


def quantile_huber(nu, tau, kappa=1.0):
    """Asymmetric Huber loss ``L_kappa(nu) * |tau - 1{nu < 0}|``.

    Quadratic for ``|nu| <= kappa`` and linear beyond.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    nu = np.asarray(nu, dtype=np.float64)
    return huber(nu, kappa) * np.abs(tau - (nu < 0))


def quantile_midpoints(m):
    return (2.0 * np.arange(1, m + 1) - 1.0) / (2.0 * m)


def quantile_regression_loss(pred: Tensor, target, weights, kappa=1.0):
    """Quantile-Huber regression of sorted predicted atoms onto target samples.

    pred: (R, M) Tensor of atoms, assumed ascending along M, paired with the
    quantile midpoints. target: (R, M') constant target samples.
    weights: (R,) row weights. For each row the loss sums over predicted atoms
    and averages over target samples; rows are combined with ``weights``.
    """
    r, m = pred.shape
    target = np.asarray(target, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if target.shape[0] != r or weights.shape != (r,):
        raise ValueError("target/weights do not match the prediction rows")
    tau = quantile_midpoints(m)[None, :, None]
    nu = Tensor(target[:, None, :]) - pred.reshape(r, m, 1)  # (R, M, M')
    small = np.abs(nu.data) <= kappa
    absnu = nu.abs()
    loss = where(small, nu * nu * 0.5, (absnu - 0.5 * kappa) * kappa)
    loss = loss * np.abs(tau - less_mask(nu, 0.0))
    per_row = loss.mean(axis=2).sum(axis=1)
    return (per_row * weights).sum()
