"""Gradient-norm tracker: reject spikes against a moving average."""

from __future__ import annotations

from dataclasses import dataclass

from deskasr.errors import ConfigError


@dataclass
class GradTrackerState:
    ema_decay: float = 0.99
    reject_factor: float = 4.0
    ema_norm: float | None = None
    rejected_count: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("ema_decay must be in [0, 1)")
        if self.reject_factor <= 0:
            raise ConfigError("reject_factor must be positive")


def grad_tracker_update(state: GradTrackerState, grad_norm: float) -> bool:
    """True to accept the update. The first norm seeds the average and is
    always accepted; rejected norms leave the average untouched."""
    if grad_norm < 0:
        raise ConfigError("grad_norm must be non-negative")
    if state.ema_norm is None:
        state.ema_norm = float(grad_norm)
        return True
    if grad_norm > state.reject_factor * state.ema_norm:
        state.rejected_count += 1
        return False
    state.ema_norm = state.ema_decay * state.ema_norm + (1.0 - state.ema_decay) * grad_norm
    return True
