"""Training loop: cross-entropy phase, expected-word-error fine-tuning,
synchronous multi-replica gradient merging, and checkpointing.

Every source of randomness is a seeded generator carried in TrainState, so a
(config, seed) pair reproduces a run bit-for-bit, including checkpoints.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from deskasr import checkpoint as ckpt
from deskasr.autodiff import Tape, Tensor, add, mul
from deskasr.decoding import beam_search
from deskasr.errors import ConfigError
from deskasr.metrics import WerBreakdown, corpus_wer, word_edit_distance
from deskasr.model.config import ModelConfig
from deskasr.model.seq2seq import BoundModel, Seq2SeqModel
from deskasr.training.adam import Adam, clip_by_global_norm, global_norm
from deskasr.training.losses import ce_loss_smoothed, expected_word_errors, mwer_loss
from deskasr.training.schedules import lr_schedule, ss_probability
from deskasr.training.tracker import GradTrackerState, grad_tracker_update
from deskasr.wordpiece import WordpieceVocab, detokenize


@dataclass
class TrainConfig:
    batch_size: int = 16
    peak_lr: float = 4e-3
    lr_ramp_steps: int = 60
    label_smoothing_eps: float = 0.1
    ss_target_prob: float = 0.4
    ss_ramp_steps: int = 600
    mwer_lambda: float = 0.01
    mwer_nbest: int = 4
    mwer_beam_width: int = 4
    mwer_lr: float = 1e-4
    grad_tracker_decay: float = 0.99
    grad_tracker_factor: float = 4.0
    clip_norm: float = 1.0
    sync_replicas: int = 1
    ce_steps: int = 600
    mwer_steps: int = 0
    checkpoint_every: int = 0
    seed: int = 0
    use_scheduled_sampling: bool = True
    use_label_smoothing: bool = True
    use_sync_stabilizers: bool = True

    def __post_init__(self):
        if not 0.0 <= self.ss_target_prob <= 1.0:
            raise ConfigError("ss_target_prob must be in [0, 1]")
        if not 0.0 <= self.label_smoothing_eps < 1.0:
            raise ConfigError("label_smoothing_eps must be in [0, 1)")
        if self.mwer_lambda < 0:
            raise ConfigError("mwer_lambda must be >= 0")
        if self.mwer_nbest < 1:
            raise ConfigError("mwer_nbest must be >= 1")
        if self.batch_size < 1 or self.sync_replicas < 1:
            raise ConfigError("batch_size and sync_replicas must be >= 1")

    @property
    def smoothing_eps(self) -> float:
        return self.label_smoothing_eps if self.use_label_smoothing else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class Utterance:
    utt_id: str
    feats: np.ndarray
    token_ids: list[int]
    transcript: str

    @property
    def ref_words(self) -> list[str]:
        return self.transcript.split()


@dataclass
class TrainState:
    step: int = 0
    optimizer: Adam | None = None
    tracker: GradTrackerState | None = None
    sample_rng: np.random.Generator | None = None
    data_rng: np.random.Generator | None = None
    _order: np.ndarray | None = None
    _cursor: int = 0

    @classmethod
    def fresh(cls, model: Seq2SeqModel, cfg: TrainConfig) -> "TrainState":
        return cls(
            step=0,
            optimizer=Adam(sorted(model.params)),
            tracker=GradTrackerState(ema_decay=cfg.grad_tracker_decay,
                                     reject_factor=cfg.grad_tracker_factor),
            sample_rng=np.random.default_rng(np.random.SeedSequence([cfg.seed, 3])),
            data_rng=np.random.default_rng(np.random.SeedSequence([cfg.seed, 5])),
        )

    def next_batch(self, data: Sequence[Utterance], batch_size: int) -> list[Utterance]:
        if self._order is None or self._cursor + batch_size > len(self._order):
            self._order = self.data_rng.permutation(len(data))
            self._cursor = 0
        idx = self._order[self._cursor : self._cursor + batch_size]
        self._cursor += batch_size
        return [data[i] for i in idx]


def forward_scheduled_sampling(bound: BoundModel, feats: np.ndarray,
                               targets: Sequence[int], p: float,
                               rng: np.random.Generator) -> list[Tensor]:
    """Teacher forcing where each input is, with probability p, replaced by a
    token sampled from the previous step's softmax. Decisions are independent
    per step; the Bernoulli draw always happens so p=0 stays aligned with
    plain teacher forcing."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"sampling probability must be in [0, 1], got {p}")
    enc = bound.encode(feats)
    state = bound.initial_state()
    prev = bound.sos_id()
    rows: list[Tensor] = []
    for t, target in enumerate(targets):
        logits, state, _ = bound.decode_step(state, enc, prev)
        rows.append(logits)
        if t < len(targets) - 1:
            if rng.random() < p:
                z = logits.data[0] - logits.data[0].max()
                probs = np.exp(z)
                probs /= probs.sum()
                prev = int(np.searchsorted(np.cumsum(probs), rng.random()))
                prev = min(prev, len(probs) - 1)
            else:
                prev = int(target)
    return rows


def sync_accumulate(replica_grads: Sequence[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
    """Deterministic sum-then-scale merge; equivalent to one large batch."""
    if not replica_grads:
        raise ConfigError("no replica gradients to merge")
    names = sorted(replica_grads[0])
    merged: dict[str, np.ndarray] = {}
    for name in names:
        total = replica_grads[0][name].copy()
        for g in replica_grads[1:]:
            total += g[name]
        merged[name] = total / len(replica_grads)
    return merged


def _mean_loss(losses: list[Tensor]) -> Tensor:
    total = losses[0]
    for l in losses[1:]:
        total = add(total, l)
    return mul(total, Tensor(np.asarray(1.0 / len(losses))))


def _ce_replica_grads(model: Seq2SeqModel, batch: Sequence[Utterance], cfg: TrainConfig,
                      p_sample: float, rng: np.random.Generator) -> tuple[float, dict[str, np.ndarray]]:
    tape = Tape()
    bound = model.bind(tape)
    losses = []
    for utt in batch:
        rows = forward_scheduled_sampling(bound, utt.feats, utt.token_ids, p_sample, rng)
        losses.append(ce_loss_smoothed(rows, utt.token_ids, cfg.smoothing_eps))
    loss = _mean_loss(losses)
    tape.backward(loss)
    return loss.item(), {name: tape.grad(t) for name, t in bound.params.items()}


def _mwer_replica_grads(model: Seq2SeqModel, batch: Sequence[Utterance], cfg: TrainConfig,
                        vocab: WordpieceVocab) -> tuple[float, dict[str, np.ndarray]]:
    tape = Tape()
    bound = model.bind(tape)
    losses = []
    for utt in batch:
        nbest = beam_search(model, utt.feats, beam_width=max(cfg.mwer_beam_width, cfg.mwer_nbest),
                            n_best=cfg.mwer_nbest, eos_id=vocab.eos_id)
        errors = [
            float(word_edit_distance(utt.ref_words, detokenize(list(h.ids), vocab).split()).errors)
            for h in nbest.hypotheses
        ]
        nbest.word_errors = errors
        enc = bound.encode(utt.feats)
        log_probs = [bound.seq_log_prob(utt.feats, list(h.ids), enc=enc)[0]
                     for h in nbest.hypotheses]
        ce_rows = bound.step_logits(utt.feats, [bound.sos_id()] + utt.token_ids[:-1], enc=enc)
        ce = ce_loss_smoothed(ce_rows, utt.token_ids, cfg.smoothing_eps)
        losses.append(mwer_loss(log_probs, errors, ce=ce, lam=cfg.mwer_lambda))
    loss = _mean_loss(losses)
    tape.backward(loss)
    return loss.item(), {name: tape.grad(t) for name, t in bound.params.items()}


def _split_replicas(batch: list[Utterance], replicas: int) -> list[list[Utterance]]:
    r = min(replicas, len(batch))
    if r <= 1:
        return [batch]
    base, extra = divmod(len(batch), r)
    chunks = []
    i = 0
    for k in range(r):
        size = base + (1 if k < extra else 0)
        chunks.append(batch[i : i + size])
        i += size
    return chunks


def train_step(model: Seq2SeqModel, batch: list[Utterance], cfg: TrainConfig,
               state: TrainState, phase: str, vocab: WordpieceVocab | None = None) -> dict:
    """One global step: replica grads, merge, clip, tracker check, update."""
    if phase == "ce":
        p = ss_probability(state.step, cfg.ss_target_prob, cfg.ss_ramp_steps) \
            if cfg.use_scheduled_sampling else 0.0
        results = [_ce_replica_grads(model, chunk, cfg, p, state.sample_rng)
                   for chunk in _split_replicas(batch, cfg.sync_replicas)]
        lr = lr_schedule(state.step, cfg.peak_lr, cfg.lr_ramp_steps) \
            if cfg.use_sync_stabilizers else cfg.peak_lr
    elif phase == "mwer":
        p = 0.0
        if vocab is None:
            raise ConfigError("mwer phase needs the wordpiece vocabulary")
        results = [_mwer_replica_grads(model, chunk, cfg, vocab)
                   for chunk in _split_replicas(batch, cfg.sync_replicas)]
        lr = cfg.mwer_lr
    else:
        raise ConfigError(f"unknown training phase {phase!r}")

    loss = float(np.mean([r[0] for r in results]))
    merged = sync_accumulate([r[1] for r in results])
    raw_norm = global_norm(merged)
    clipped, _ = clip_by_global_norm(merged, cfg.clip_norm)
    clipped_norm = min(raw_norm, cfg.clip_norm) if cfg.clip_norm > 0 else raw_norm
    if cfg.use_sync_stabilizers:
        accepted = grad_tracker_update(state.tracker, clipped_norm)
    else:
        accepted = True
    if accepted:
        state.optimizer.step(model.params, clipped, lr)
    state.step += 1
    return {"step": state.step, "phase": phase, "lr": lr, "ss_prob": p,
            "loss": loss, "grad_norm": raw_norm, "accepted": accepted}


def run_training(model: Seq2SeqModel, data: Sequence[Utterance], cfg: TrainConfig,
                 vocab: WordpieceVocab, state: TrainState | None = None,
                 log_fn: Callable[[dict], None] | None = None,
                 checkpoint_fn: Callable[[int], None] | None = None) -> TrainState:
    """CE phase followed by the optional expected-word-error fine-tune."""
    if state is None:
        state = TrainState.fresh(model, cfg)
    data = list(data)
    while state.step < cfg.ce_steps:
        batch = state.next_batch(data, cfg.batch_size)
        record = train_step(model, batch, cfg, state, "ce")
        if log_fn:
            log_fn(record)
        if checkpoint_fn and cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
            checkpoint_fn(state.step)
    while state.step < cfg.ce_steps + cfg.mwer_steps:
        batch = state.next_batch(data, cfg.batch_size)
        record = train_step(model, batch, cfg, state, "mwer", vocab=vocab)
        if log_fn:
            log_fn(record)
        if checkpoint_fn and cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
            checkpoint_fn(state.step)
    return state


# ---- evaluation helpers ----

def decode_corpus(model: Seq2SeqModel, data: Sequence[Utterance], vocab: WordpieceVocab,
                  beam_width: int = 8, n_best: int = 1,
                  max_len: int | None = None) -> list:
    from deskasr.decoding import NBestList  # local import to avoid cycle noise

    out: list[NBestList] = []
    for utt in data:
        nbest = beam_search(model, utt.feats, beam_width=beam_width,
                            n_best=n_best, max_len=max_len, eos_id=vocab.eos_id)
        nbest.utt_id = utt.utt_id
        out.append(nbest)
    return out


def evaluate_wer(model: Seq2SeqModel, data: Sequence[Utterance], vocab: WordpieceVocab,
                 beam_width: int = 8) -> tuple[WerBreakdown, list[str]]:
    nbests = decode_corpus(model, data, vocab, beam_width=beam_width, n_best=1)
    hyps = [detokenize(list(nb.top().ids), vocab) for nb in nbests]
    refs = [utt.ref_words for utt in data]
    return corpus_wer(refs, [h.split() for h in hyps]), hyps


def expected_nbest_errors(model: Seq2SeqModel, data: Sequence[Utterance],
                          vocab: WordpieceVocab, n_best: int = 4,
                          beam_width: int = 4) -> float:
    """Mean over utterances of the renormalized N-best expectation of word errors."""
    vals = []
    for utt in data:
        nbest = beam_search(model, utt.feats, beam_width=max(beam_width, n_best),
                            n_best=n_best, eos_id=vocab.eos_id)
        errs = [
            float(word_edit_distance(utt.ref_words, detokenize(list(h.ids), vocab).split()).errors)
            for h in nbest.hypotheses
        ]
        vals.append(expected_word_errors([h.log_prob for h in nbest.hypotheses], errs))
    return float(np.mean(vals))


# ---- checkpoint plumbing ----

def save_training_checkpoint(path: str | Path, model: Seq2SeqModel, cfg: TrainConfig,
                             state: TrainState) -> None:
    tensors = dict(model.params)
    tensors.update(state.optimizer.state_tensors())
    extra = {
        "model_config": model.cfg.to_dict(),
        "train_config": cfg.to_dict(),
        "step": state.step,
        "adam_t": state.optimizer.t,
        "tracker": {"ema_norm": state.tracker.ema_norm,
                    "rejected_count": state.tracker.rejected_count},
        "sample_rng": state.sample_rng.bit_generator.state,
        "data_rng": state.data_rng.bit_generator.state,
    }
    ckpt.save_tensors(path, tensors, extra=extra)


def load_training_checkpoint(path: str | Path) -> tuple[Seq2SeqModel, TrainConfig, TrainState]:
    tensors, extra = ckpt.load_tensors(path)
    model_cfg = ModelConfig.from_dict(extra["model_config"])
    cfg = TrainConfig.from_dict(extra["train_config"])
    params = {k: v.copy() for k, v in tensors.items() if not k.startswith("adam.")}
    model = Seq2SeqModel(model_cfg, params)
    state = TrainState.fresh(model, cfg)
    state.step = extra["step"]
    state.optimizer.load_state_tensors(tensors, extra["adam_t"])
    state.tracker.ema_norm = extra["tracker"]["ema_norm"]
    state.tracker.rejected_count = extra["tracker"]["rejected_count"]
    state.sample_rng.bit_generator.state = extra["sample_rng"]
    state.data_rng.bit_generator.state = extra["data_rng"]
    return model, cfg, state


def load_model_checkpoint(path: str | Path) -> Seq2SeqModel:
    model, _, _ = load_training_checkpoint(path)
    return model
