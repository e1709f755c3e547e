"""Additive attention, single- and multi-head.

Per head h over encoder states h_t and query s:

    e_t = v_h' tanh(Ws_h s + We_h h_t)
    a   = masked softmax of e over frames
    ctx_h = sum_t a_t h_t

Head contexts are concatenated and passed through an output projection. The
single-head routine is the h=1 special case with identical arithmetic, so the
two paths agree bit-for-bit when given the same parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deskasr.autodiff import (
    Tensor,
    add,
    add_row,
    concat,
    masked_softmax,
    matmul,
    reshape,
    tanh,
)
from deskasr.model.lstm import init_uniform


@dataclass
class AttentionResult:
    """Projected context plus per-head weights (detached, heads x T)."""

    context: Tensor
    weights: np.ndarray


def attention_param_arrays(prefix: str, enc_dim: int, query_dim: int,
                           attention_dim: int, heads: int, out_dim: int,
                           rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for h in range(heads):
        params[f"{prefix}.h{h}.We"] = init_uniform(rng, enc_dim, attention_dim,
                                                   (enc_dim, attention_dim))
        params[f"{prefix}.h{h}.Ws"] = init_uniform(rng, query_dim, attention_dim,
                                                   (query_dim, attention_dim))
        params[f"{prefix}.h{h}.v"] = init_uniform(rng, attention_dim, 1, (attention_dim, 1))
    params[f"{prefix}.out.W"] = init_uniform(rng, heads * enc_dim, out_dim,
                                             (heads * enc_dim, out_dim))
    params[f"{prefix}.out.b"] = np.zeros((1, out_dim))
    return params


def _head_weights(params: dict[str, Tensor], prefix: str, head: int,
                  query: Tensor, enc: Tensor, mask: np.ndarray | None) -> Tensor:
    proj = add_row(matmul(enc, params[f"{prefix}.h{head}.We"]),
                   matmul(query, params[f"{prefix}.h{head}.Ws"]))
    energies = matmul(tanh(proj), params[f"{prefix}.h{head}.v"])  # [T x 1]
    return masked_softmax(reshape(energies, (enc.shape[0],)), mask)


def attend_additive(params: dict[str, Tensor], prefix: str, heads: int,
                    query: Tensor, enc: Tensor,
                    mask: np.ndarray | None = None) -> AttentionResult:
    """Multi-head additive attention over [T x H] encoder states."""
    t = enc.shape[0]
    contexts = []
    weights = np.zeros((heads, t))
    for h in range(heads):
        alpha = _head_weights(params, prefix, h, query, enc, mask)
        weights[h] = alpha.data
        contexts.append(matmul(reshape(alpha, (1, t)), enc))
    stacked = concat(contexts, axis=1)
    context = add(matmul(stacked, params[f"{prefix}.out.W"]), params[f"{prefix}.out.b"])
    return AttentionResult(context=context, weights=weights)


def attend_additive_single(params: dict[str, Tensor], prefix: str,
                           query: Tensor, enc: Tensor,
                           mask: np.ndarray | None = None) -> AttentionResult:
    """Dedicated single-head path (no concat machinery)."""
    t = enc.shape[0]
    alpha = _head_weights(params, prefix, 0, query, enc, mask)
    raw = matmul(reshape(alpha, (1, t)), enc)
    context = add(matmul(raw, params[f"{prefix}.out.W"]), params[f"{prefix}.out.b"])
    return AttentionResult(context=context, weights=alpha.data.reshape(1, t))
