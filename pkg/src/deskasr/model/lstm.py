"""LSTM cell over the autodiff tape, with fused gate projections."""

from __future__ import annotations

import numpy as np

from deskasr.autodiff import Tensor, cols, lstm_cell

FORGET_BIAS = 1.0


def init_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                 shape: tuple[int, ...]) -> np.ndarray:
    """Fan-scaled uniform weights, zero-mean.

    A fixed +-0.05 range starves small stacked layers (activations shrink by
    roughly 0.05*sqrt(fan_in) per layer), so the range adapts to the fan-in
    and fan-out instead; at production-scale fan-ins this lands near +-0.05.
    """
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def lstm_param_arrays(prefix: str, input_dim: int, units: int,
                      rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Fan-scaled uniform weights, zero biases except forget gate at 1.0."""
    wx = init_uniform(rng, input_dim + units, units, (input_dim, 4 * units))
    wh = init_uniform(rng, input_dim + units, units, (units, 4 * units))
    b = np.zeros((1, 4 * units))
    b[0, units : 2 * units] = FORGET_BIAS  # gate order: input, forget, cell, output
    return {f"{prefix}.Wx": wx, f"{prefix}.Wh": wh, f"{prefix}.b": b}


def lstm_step(params: dict[str, Tensor], prefix: str, x: Tensor,
              h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """One cell update; ``x``/``h``/``c`` are 1 x D row vectors."""
    units = h.shape[1]
    hc = lstm_cell(x, h, c, params[f"{prefix}.Wx"], params[f"{prefix}.Wh"],
                   params[f"{prefix}.b"])
    return cols(hc, 0, units), cols(hc, units, 2 * units)
