"""Beam-search N-best decoding and a brute-force enumeration oracle.

First-pass scores are pure sums of step log-probs (no length normalization);
length preferences belong to the second-pass rescorer. Ties break on ascending
token ids so decodes are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deskasr.autodiff import log_softmax
from deskasr.errors import ConfigError
from deskasr.model.seq2seq import BoundModel, DecoderState, EncoderOutput, Seq2SeqModel


@dataclass
class Hypothesis:
    ids: tuple[int, ...]          # includes the terminal eos
    log_prob: float


@dataclass
class NBestList:
    hypotheses: list[Hypothesis]
    word_errors: list[int] | None = None
    utt_id: str | None = None

    def __len__(self) -> int:
        return len(self.hypotheses)

    def top(self) -> Hypothesis:
        return self.hypotheses[0]


@dataclass
class _BeamItem:
    ids: tuple[int, ...]
    score: float
    state: DecoderState
    prev_token: int


def _step_log_probs(bound: BoundModel, item: _BeamItem, enc: EncoderOutput):
    logits, new_state, _ = bound.decode_step(item.state, enc, item.prev_token)
    return log_softmax(logits, axis=1).data[0], new_state


def beam_search(model: Seq2SeqModel | BoundModel, feats: np.ndarray, beam_width: int = 8,
                n_best: int = 4, max_len: int | None = None, eos_id: int = 1) -> NBestList:
    """Time-synchronous label expansion over the wordpiece vocabulary.

    Every active hypothesis is expanded by every token; the top ``beam_width``
    expansions survive, eos expansions move to the finished pool. Search stops
    once ``n_best`` finished hypotheses can no longer be beaten (extension
    never raises a score) or at ``max_len``, where survivors are completed by
    forcing eos.
    """
    if not 1 <= n_best <= beam_width:
        raise ConfigError(f"need beam_width >= n_best >= 1, got {beam_width}, {n_best}")
    bound = model.bind(None) if isinstance(model, Seq2SeqModel) else model
    enc = bound.encode(feats)
    if max_len is None:
        max_len = max(2 * enc.length, 2)
    if max_len < 1:
        raise ConfigError("max_len must be >= 1")

    active = [_BeamItem(ids=(), score=0.0, state=bound.initial_state(),
                        prev_token=bound.sos_id())]
    finished: list[Hypothesis] = []

    for _ in range(max_len):
        if not active:
            break
        candidates = []
        for item in active:
            lps, new_state = _step_log_probs(bound, item, enc)
            for tok in range(bound.cfg.vocab_size):
                candidates.append((item.score + float(lps[tok]), item.ids + (tok,),
                                   new_state, tok))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        next_active = []
        for score, ids, state, tok in candidates[:beam_width]:
            if tok == eos_id:
                finished.append(Hypothesis(ids=ids, log_prob=score))
            else:
                next_active.append(_BeamItem(ids=ids, score=score, state=state,
                                             prev_token=tok))
        active = next_active
        if len(finished) >= n_best:
            floor = sorted(finished, key=lambda h: -h.log_prob)[n_best - 1].log_prob
            if not active or max(i.score for i in active) < floor:
                break

    if len(finished) < n_best and active:
        # out of steps: complete survivors by forcing eos
        for item in active:
            lps, _ = _step_log_probs(bound, item, enc)
            finished.append(Hypothesis(ids=item.ids + (eos_id,),
                                       log_prob=item.score + float(lps[eos_id])))

    finished.sort(key=lambda h: (-h.log_prob, h.ids))
    return NBestList(hypotheses=finished[:n_best])


def brute_force_decode(model: Seq2SeqModel | BoundModel, feats: np.ndarray,
                       max_len: int, eos_id: int = 1) -> list[Hypothesis]:
    """Score every eos-terminated sequence up to ``max_len`` tokens.

    Test oracle only; refuses instances beyond a million sequences.
    """
    bound = model.bind(None) if isinstance(model, Seq2SeqModel) else model
    v = bound.cfg.vocab_size
    if v ** max_len > 1_000_000:
        raise ConfigError(f"brute force over V^max_len = {v}^{max_len} is too large")
    enc = bound.encode(feats)

    out: list[Hypothesis] = []

    def extend(prefix: tuple[int, ...], score: float, state: DecoderState) -> None:
        lps, new_state = _step_log_probs(bound, _BeamItem(prefix, score, state,
                                                          prefix[-1] if prefix else bound.sos_id()),
                                         enc)
        out.append(Hypothesis(ids=prefix + (eos_id,), log_prob=score + float(lps[eos_id])))
        if len(prefix) + 1 >= max_len:
            return
        for tok in range(v):
            if tok == eos_id:
                continue
            extend(prefix + (tok,), score + float(lps[tok]), new_state)

    extend((), 0.0, bound.initial_state())
    out.sort(key=lambda h: (-h.log_prob, h.ids))
    return out


def greedy_decode(model: Seq2SeqModel | BoundModel, feats: np.ndarray,
                  max_len: int | None = None, eos_id: int = 1) -> Hypothesis:
    """Step-argmax decoding; equivalent to beam_search with width 1."""
    bound = model.bind(None) if isinstance(model, Seq2SeqModel) else model
    enc = bound.encode(feats)
    if max_len is None:
        max_len = max(2 * enc.length, 2)
    state = bound.initial_state()
    prev = bound.sos_id()
    ids: list[int] = []
    score = 0.0
    for _ in range(max_len):
        lps, state = _step_log_probs(bound, _BeamItem(tuple(ids), score, state, prev), enc)
        tok = int(np.argmax(lps))
        ids.append(tok)
        score += float(lps[tok])
        prev = tok
        if tok == eos_id:
            return Hypothesis(ids=tuple(ids), log_prob=score)
    # force-eos completion mirrors beam_search
    lps, _ = _step_log_probs(bound, _BeamItem(tuple(ids), score, state, prev), enc)
    return Hypothesis(ids=tuple(ids) + (eos_id,), log_prob=score + float(lps[eos_id]))
