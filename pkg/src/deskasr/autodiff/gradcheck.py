"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from deskasr.errors import ConfigError
from deskasr.autodiff.tensor import Tape, Tensor


def grad_check(f: Callable[[Tensor], Tensor], x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` must map a single tensor to a scalar tensor and be deterministic.
    Relative error per coordinate is |analytic - numeric| / max(1, |analytic|).
    """
    if eps <= 0:
        raise ConfigError("grad_check eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    tape = Tape()
    xt = tape.leaf(x)
    tape.backward(f(xt))
    analytic = tape.grad(xt)

    numeric = np.zeros_like(x)
    flat = x.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(x.copy())).item()
        flat[i] = orig - eps
        lo = f(Tensor(x.copy())).item()
        flat[i] = orig
        num_flat[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check_params(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    names: list[str] | None = None,
) -> float:
    """Finite-difference check over a whole named parameter set.

    ``f`` receives a name -> Tensor mapping and returns a scalar loss tensor.
    Mutates nothing; returns the max relative error across every coordinate of
    every checked parameter (all of them unless ``names`` restricts the sweep).
    """
    arrays = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tape = Tape()
    bound = {k: tape.leaf(v) for k, v in arrays.items()}
    tape.backward(f(bound))
    grads = {k: tape.grad(t) for k, t in bound.items()}

    def eval_loss() -> float:
        return f({k: Tensor(v) for k, v in arrays.items()}).item()

    worst = 0.0
    for name in names if names is not None else list(arrays):
        flat = arrays[name].reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = eval_loss()
            flat[i] = orig - eps
            lo = eval_loss()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            rel = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
            worst = max(worst, rel)
    return worst
