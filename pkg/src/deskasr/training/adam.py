"""Adam with global-norm gradient clipping."""

from __future__ import annotations

import numpy as np


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for name in sorted(grads):
        g = grads[name]
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients so their joint norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {k: v * scale for k, v in grads.items()}, norm


class Adam:
    def __init__(self, param_names: list[str], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {n: None for n in param_names}  # lazily sized
        self.v: dict[str, np.ndarray] = {n: None for n in param_names}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        """In-place parameter update; lr=0 leaves parameters bit-identical."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name in sorted(params):
            g = grads[name]
            if self.m[name] is None:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * (g * g)
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            params[name] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_tensors(self, prefix: str = "adam") -> dict[str, np.ndarray]:
        out = {}
        for name, m in self.m.items():
            if m is not None:
                out[f"{prefix}.m.{name}"] = m
                out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray], t: int,
                           prefix: str = "adam") -> None:
        self.t = t
        for key, arr in tensors.items():
            if key.startswith(f"{prefix}.m."):
                self.m[key[len(prefix) + 3:]] = arr.copy()
            elif key.startswith(f"{prefix}.v."):
                self.v[key[len(prefix) + 3:]] = arr.copy()
