"""Step schedules: scheduled-sampling probability and learning-rate ramp."""

from __future__ import annotations

from deskasr.errors import ConfigError


def ss_probability(step: int, target_prob: float = 0.4, ramp_steps: int = 100_000) -> float:
    """Linear 0 -> target over ramp_steps, constant afterwards."""
    if step < 0:
        raise ConfigError("step must be non-negative")
    if not 0.0 <= target_prob <= 1.0:
        raise ConfigError(f"target_prob must be in [0, 1], got {target_prob}")
    if ramp_steps <= 0:
        return target_prob
    return min(step / ramp_steps, 1.0) * target_prob


def lr_schedule(step: int, peak_lr: float, ramp_steps: int) -> float:
    """Linear 0 -> peak over ramp_steps, constant afterwards."""
    if step < 0:
        raise ConfigError("step must be non-negative")
    if ramp_steps <= 0:
        return peak_lr
    return min(step / ramp_steps, 1.0) * peak_lr
