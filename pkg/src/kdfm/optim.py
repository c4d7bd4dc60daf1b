"""Adam with bias correction, coupled L2 regularization, and stepwise lr decay.

The regularizer is applied as an explicit gradient term (grad + inv_c * params),
i.e. classic L2 on every coordinate, not decoupled weight decay. The learning
rate decays by a constant factor once per epoch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class RegConfig:
    """L2 strength and the learning-rate schedule.

    epoch_length may be left as None, in which case the training loop fills
    in its own steps-per-epoch before querying lr_at.
    """

    inv_c: float = 5e-4
    lr0: float = 7e-5
    decay_gamma: float = 0.97
    epoch_length: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.inv_c) and self.inv_c >= 0.0):
            raise ConfigError(f"inv_c must be finite and >= 0, got {self.inv_c}")
        if not (np.isfinite(self.lr0) and self.lr0 > 0.0):
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not (0.0 < self.decay_gamma <= 1.0):
            raise ConfigError(f"decay_gamma must be in (0, 1], got {self.decay_gamma}")
        if self.epoch_length is not None and self.epoch_length <= 0:
            raise ConfigError(f"epoch_length must be positive, got {self.epoch_length}")


def init_adam(n: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(m=np.zeros(n), v=np.zeros(n), t=0, beta1=beta1, beta2=beta2, eps=eps)


def l2_augment(grad: np.ndarray, params: np.ndarray, inv_c: float) -> np.ndarray:
    """Gradient of the (inv_c / 2) * ||params||^2 regularizer added to grad."""
    grad = np.asarray(grad, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    if grad.shape != params.shape:
        raise ShapeError(f"grad shape {grad.shape} != params shape {params.shape}")
    return grad + inv_c * params


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected Adam update. Returns (new_params, new_state)."""
    if state.m.shape != params.shape:
        raise ShapeError(f"adam state length {state.m.shape} != params {params.shape}")
    if grad.shape != params.shape:
        raise ShapeError(f"grad shape {grad.shape} != params {params.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite gradient at adam step {state.t + 1}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return new_params, new_state


def lr_at(reg: RegConfig, step: int) -> float:
    """lr0 * decay_gamma^(completed epochs) at a global step index."""
    if reg.epoch_length is None:
        raise ConfigError("epoch_length is unset; resolve it before querying the schedule")
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    return reg.lr0 * reg.decay_gamma ** (step // reg.epoch_length)
