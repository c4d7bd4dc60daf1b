"""Classification losses with gradients taken with respect to logits.

Every loss consumes a target distribution and the softmax probabilities and
returns (value, dValue/dlogits); folding the softmax Jacobian in here keeps
the gradients stable. An all-zero target means "ignore this sample" and
yields zero value and zero gradient for every loss kind.

Log arguments are clamped at ``log_clamp_eps`` and the gradients below are
the exact derivatives of the clamped expressions, so finite-difference
checks pass everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, UnsupportedTargetError

LOSS_KINDS = ("ce", "rce", "sce", "mae", "nce")


@dataclass(frozen=True)
class LossSpec:
    """Which loss to use and its knobs (alpha/beta apply to SCE only)."""

    kind: str = "ce"
    alpha: float = 1.0
    beta: float = 0.0
    log_clamp_eps: float = 1e-4

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ConfigError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta >= 0.0):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        if not (0.0 < self.log_clamp_eps < 1.0):
            raise ConfigError(f"log_clamp_eps must be in (0, 1), got {self.log_clamp_eps}")


def _as_batch(targets: np.ndarray, probs: np.ndarray):
    targets = np.asarray(targets, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if targets.shape != probs.shape:
        raise ShapeError(f"target shape {targets.shape} != probs shape {probs.shape}")
    squeeze = targets.ndim == 1
    if squeeze:
        targets = targets[None, :]
        probs = probs[None, :]
    if targets.ndim != 2:
        raise ShapeError(f"expected [K] or [B, K] arrays, got shape {targets.shape}")
    return targets, probs, squeeze


def ce_batch(targets: np.ndarray, probs: np.ndarray, eps: float = 1e-4):
    """Cross-entropy -sum_k t_k ln(max(p_k, eps)) per row.

    Away from the clamp the gradient is the familiar probs - target.
    """
    targets, probs, squeeze = _as_batch(targets, probs)
    active = probs > eps
    values = -(targets * np.log(np.maximum(probs, eps))).sum(axis=1)
    weight = (targets * active).sum(axis=1, keepdims=True)
    grads = probs * weight - targets * active
    return (values[0], grads[0]) if squeeze else (values, grads)


def rce_batch(targets: np.ndarray, probs: np.ndarray, eps: float = 1e-4):
    """Reverse cross-entropy -sum_k p_k ln(max(t_k, eps)); gradient flows through p."""
    targets, probs, squeeze = _as_batch(targets, probs)
    log_t = np.log(np.maximum(targets, eps))
    values = -(probs * log_t).sum(axis=1)
    grads = probs * ((probs * log_t).sum(axis=1, keepdims=True) - log_t)
    ignored = targets.sum(axis=1) <= 0.0
    values = np.where(ignored, 0.0, values)
    grads = np.where(ignored[:, None], 0.0, grads)
    return (values[0], grads[0]) if squeeze else (values, grads)


def sce_batch(targets: np.ndarray, probs: np.ndarray, alpha: float, beta: float, eps: float = 1e-4):
    """Symmetric cross-entropy: alpha * CE + beta * RCE."""
    ce_v, ce_g = ce_batch(targets, probs, eps)
    rce_v, rce_g = rce_batch(targets, probs, eps)
    return alpha * ce_v + beta * rce_v, alpha * ce_g + beta * rce_g


def mae_batch(targets: np.ndarray, probs: np.ndarray):
    """Mean absolute error sum_k |p_k - t_k| per row."""
    targets, probs, squeeze = _as_batch(targets, probs)
    diff = probs - targets
    values = np.abs(diff).sum(axis=1)
    sign = np.sign(diff)
    grads = probs * (sign - (sign * probs).sum(axis=1, keepdims=True))
    ignored = targets.sum(axis=1) <= 0.0
    values = np.where(ignored, 0.0, values)
    grads = np.where(ignored[:, None], 0.0, grads)
    return (values[0], grads[0]) if squeeze else (values, grads)


def nce_batch(targets: np.ndarray, probs: np.ndarray, eps: float = 1e-4):
    """Normalized cross-entropy: CE(t, p) / sum_k CE(e_k, p). One-hot targets only."""
    targets, probs, squeeze = _as_batch(targets, probs)
    row_sums = targets.sum(axis=1)
    one_hot = (targets == 1.0).sum(axis=1) == 1
    ignored = row_sums <= 0.0
    if not np.all(one_hot | ignored):
        raise UnsupportedTargetError("nce requires one-hot (or all-zero) targets")
    k = targets.shape[1]
    if k == 1:
        zeros = np.zeros_like(probs)
        return (0.0, zeros[0]) if squeeze else (np.zeros(len(targets)), zeros)
    active = probs > eps
    log_p = np.log(np.maximum(probs, eps))
    numer = -(targets * log_p).sum(axis=1)
    denom = -log_p.sum(axis=1)
    # dN and dD are the clamped CE gradients for the target and for every class.
    num_weight = (targets * active).sum(axis=1, keepdims=True)
    d_numer = probs * num_weight - targets * active
    d_denom = probs * active.sum(axis=1, keepdims=True) - active
    values = numer / denom
    grads = (d_numer * denom[:, None] - numer[:, None] * d_denom) / (denom[:, None] ** 2)
    values = np.where(ignored, 0.0, values)
    grads = np.where(ignored[:, None], 0.0, grads)
    return (values[0], grads[0]) if squeeze else (values, grads)


def ce(target: np.ndarray, probs: np.ndarray, eps: float = 1e-4):
    return ce_batch(target, probs, eps)


def rce(target: np.ndarray, probs: np.ndarray, eps: float = 1e-4):
    return rce_batch(target, probs, eps)


def sce(target: np.ndarray, probs: np.ndarray, alpha: float, beta: float, eps: float = 1e-4):
    return sce_batch(target, probs, alpha, beta, eps)


def mae(target: np.ndarray, probs: np.ndarray):
    return mae_batch(target, probs)


def nce(target: np.ndarray, probs: np.ndarray, eps: float = 1e-4):
    return nce_batch(target, probs, eps)


def batch_loss(spec: LossSpec, targets: np.ndarray, probs: np.ndarray):
    """Dispatch on spec.kind; returns per-row (values [B], grads [B, K])."""
    if spec.kind == "ce":
        return ce_batch(targets, probs, spec.log_clamp_eps)
    if spec.kind == "rce":
        return rce_batch(targets, probs, spec.log_clamp_eps)
    if spec.kind == "sce":
        return sce_batch(targets, probs, spec.alpha, spec.beta, spec.log_clamp_eps)
    if spec.kind == "mae":
        return mae_batch(targets, probs)
    return nce_batch(targets, probs, spec.log_clamp_eps)


def symmetry_sum(spec: LossSpec, probs: np.ndarray) -> float:
    """sum_k loss(e_k, probs) -- constant over probs iff the loss is symmetric."""
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[-1]
    eye = np.eye(k)
    values, _ = batch_loss(spec, eye, np.broadcast_to(probs, (k, k)).copy())
    return float(values.sum())


def symmetry_defect(spec: LossSpec, dists: np.ndarray) -> float:
    """Spread (max - min) of symmetry_sum over the sampled distributions."""
    dists = np.asarray(dists, dtype=np.float64)
    if dists.ndim == 1:
        dists = dists[None, :]
    sums = [symmetry_sum(spec, p) for p in dists]
    return float(max(sums) - min(sums))
