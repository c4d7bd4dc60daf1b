"""Exponential moving average of the parameter vector, used at inference time.

The effective decay ramps in as min(base_decay, (1 + t) / (10 + t)) with t the
running update counter, so early updates lean heavily on the fresh parameters.
The counter normally starts at 0; counter_start=10 reproduces the alternative
reading where the ramp begins further along.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, UninitializedEmaError


@dataclass
class EmaState:
    shadow: np.ndarray
    base_decay: float = 0.9999
    num_updates: int = 0
    counter_start: int = 0


def init_ema(params: np.ndarray, base_decay: float = 0.9999, counter_start: int = 0) -> EmaState:
    """Shadow starts as a copy of the given parameters."""
    if not (0.0 < base_decay < 1.0):
        raise ConfigError(f"base_decay must be in (0, 1), got {base_decay}")
    if counter_start < 0:
        raise ConfigError(f"counter_start must be >= 0, got {counter_start}")
    return EmaState(
        shadow=np.array(params, dtype=np.float64, copy=True),
        base_decay=base_decay,
        num_updates=counter_start,
        counter_start=counter_start,
    )


def effective_decay(state: EmaState) -> float:
    """Decay the next update will use."""
    return min(state.base_decay, (1.0 + state.num_updates) / (10.0 + state.num_updates))


def ema_update(state: EmaState, params: np.ndarray) -> EmaState:
    """shadow <- d * shadow + (1 - d) * params with the ramped decay d."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != state.shadow.shape:
        raise ShapeError(f"params shape {params.shape} != shadow shape {state.shadow.shape}")
    decay = effective_decay(state)
    shadow = decay * state.shadow + (1.0 - decay) * params
    return EmaState(
        shadow=shadow,
        base_decay=state.base_decay,
        num_updates=state.num_updates + 1,
        counter_start=state.counter_start,
    )


def ema_params(state: EmaState) -> np.ndarray:
    """Averaged parameters for inference; requires at least one update."""
    if state.num_updates <= state.counter_start:
        raise UninitializedEmaError("EMA queried before any update was applied")
    return state.shadow.copy()
