"""Training criteria: label-smoothed cross-entropy and N-best expected word errors.

The expected-word-error loss weights each hypothesis's word-error count,
centered by the N-best mean (a variance-reduction baseline that leaves the
gradient unchanged), by the probability mass the model concentrates on it
after renormalizing over just the N-best, then interpolates a cross-entropy
term for stability.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from deskasr.autodiff import (
    Tensor,
    add,
    concat,
    log_softmax,
    mul,
    neg,
    reshape,
    softmax,
    sum_all,
)
from deskasr.errors import ConfigError, ContractError


def smoothed_targets(targets: Sequence[int], vocab_size: int, eps: float) -> np.ndarray:
    """Per-step target rows: (1-eps) one-hot plus eps/V everywhere."""
    if not 0.0 <= eps <= 1.0:
        raise ConfigError(f"label smoothing eps must be in [0, 1], got {eps}")
    q = np.full((len(targets), vocab_size), eps / vocab_size)
    for i, t in enumerate(targets):
        q[i, int(t)] += 1.0 - eps
    return q


def ce_loss_smoothed(step_logits: Sequence[Tensor] | Tensor, targets: Sequence[int],
                     eps: float = 0.0) -> Tensor:
    """Mean over steps of the smoothed cross-entropy."""
    logits = step_logits if isinstance(step_logits, Tensor) else concat(list(step_logits), axis=0)
    if logits.shape[0] != len(targets):
        raise ContractError(
            f"{logits.shape[0]} logit rows vs {len(targets)} targets"
        )
    q = Tensor(smoothed_targets(targets, logits.shape[1], eps))
    lsm = log_softmax(logits, axis=1)
    # mean over steps of the per-step inner products == total / n_steps
    total = sum_all(mul(q, lsm))
    return neg(mul(total, Tensor(np.asarray(1.0 / len(targets)))))


def mwer_loss(nbest_log_probs: Sequence[Tensor], word_errors: Sequence[float],
              ce: Tensor | float = 0.0, lam: float = 0.0) -> Tensor:
    """Mean-centered expected word errors over an N-best, plus lam * ce."""
    n = len(nbest_log_probs)
    if n == 0:
        raise ContractError("empty N-best list")
    if len(word_errors) != n:
        raise ContractError(f"{n} hypotheses but {len(word_errors)} error counts")
    scores = concat([reshape(lp, (1,)) for lp in nbest_log_probs], axis=0)
    p_hat = softmax(scores, axis=0)
    w = np.asarray(word_errors, dtype=np.float64)
    centered = (w - w.mean()) / n
    first = sum_all(mul(p_hat, Tensor(centered)))
    ce_t = ce if isinstance(ce, Tensor) else Tensor(np.asarray(float(ce)))
    if lam == 0.0:
        return first
    return add(first, mul(Tensor(np.asarray(lam)), ce_t))


def expected_word_errors(log_probs: Sequence[float], word_errors: Sequence[float]) -> float:
    """Plain-number expectation sum_i P_hat_i * W_i (no baseline)."""
    lp = np.asarray(log_probs, dtype=np.float64)
    z = lp - lp.max()
    p = np.exp(z) / np.exp(z).sum()
    return float(np.sum(p * np.asarray(word_errors, dtype=np.float64)))
