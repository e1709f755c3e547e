"""Encoder / attender / decoder network over the autodiff tape.

The encoder is a stacked (uni- or bidirectional) LSTM mapping stacked log-mel
frames to higher-level states h_enc. At each output step the decoder attends
with its previous top hidden state, concatenates the fresh context with the
embedding of the previous token as LSTM input, and projects the new top hidden
state to vocabulary logits.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from deskasr.autodiff import (
    Tape,
    Tensor,
    add,
    concat,
    get,
    log_softmax,
    matmul,
    row,
)
from deskasr.errors import ConfigError, ShapeError
from deskasr.model.attention import AttentionResult, attend_additive, attention_param_arrays
from deskasr.model.config import ModelConfig
from deskasr.model.lstm import init_uniform, lstm_param_arrays, lstm_step


@dataclass
class EncoderOutput:
    states: Tensor            # [T x enc_output_dim]
    length: int
    mask: np.ndarray | None = None


@dataclass
class DecoderState:
    """Per-hypothesis decoder recurrence; never shared between hypotheses."""

    hidden: tuple[tuple[Tensor, Tensor], ...]  # (h, c) per layer
    context: Tensor                            # last attention context, 1 x ctx

    def top_hidden(self) -> Tensor:
        return self.hidden[-1][0]


class Seq2SeqModel:
    """Holds the immutable parameter arrays; all math goes through ``bind``."""

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0) -> "Seq2SeqModel":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
        p: dict[str, np.ndarray] = {}
        in_dim = cfg.feature_dim
        for layer in range(cfg.enc_layers):
            p.update(lstm_param_arrays(f"enc{layer}.fwd", in_dim, cfg.enc_units, rng))
            if cfg.bidirectional:
                p.update(lstm_param_arrays(f"enc{layer}.bwd", in_dim, cfg.enc_units, rng))
            in_dim = cfg.enc_output_dim
        p.update(attention_param_arrays("att", cfg.enc_output_dim, cfg.dec_units,
                                        cfg.attention_dim, cfg.attention_heads,
                                        cfg.context_dim, rng))
        p["emb.E"] = init_uniform(rng, cfg.vocab_size, cfg.embedding_dim,
                                  (cfg.vocab_size, cfg.embedding_dim))
        dec_in = cfg.embedding_dim + cfg.context_dim
        for layer in range(cfg.dec_layers):
            p.update(lstm_param_arrays(f"dec{layer}", dec_in, cfg.dec_units, rng))
            dec_in = cfg.dec_units
        p["out.W"] = init_uniform(rng, cfg.dec_units, cfg.vocab_size,
                                  (cfg.dec_units, cfg.vocab_size))
        p["out.b"] = np.zeros((1, cfg.vocab_size))
        return cls(cfg, p)

    def bind(self, tape: Tape | None) -> "BoundModel":
        if tape is None:
            tensors = {k: Tensor(v) for k, v in self.params.items()}
        else:
            tensors = {k: tape.leaf(v) for k, v in self.params.items()}
        return BoundModel(self.cfg, tensors, tape)

    def apply_update(self, deltas: dict[str, np.ndarray]) -> None:
        for name, d in deltas.items():
            self.params[name] = self.params[name] + d


class BoundModel:
    """Parameters registered on one tape (or none, for inference)."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor], tape: Tape | None):
        self.cfg = cfg
        self.params = params
        self.tape = tape

    # ---- listener ----

    def encode(self, feats: np.ndarray, mask: np.ndarray | None = None) -> EncoderOutput:
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.cfg.feature_dim:
            raise ConfigError(
                f"feature dim {feats.shape} does not match config feature_dim="
                f"{self.cfg.feature_dim}"
            )
        t = feats.shape[0]
        layer_rows: list[Tensor] = [row(Tensor(feats), i) for i in range(t)]
        for layer in range(self.cfg.enc_layers):
            fwd = self._run_direction(f"enc{layer}.fwd", layer_rows, reverse=False)
            if self.cfg.bidirectional:
                bwd = self._run_direction(f"enc{layer}.bwd", layer_rows, reverse=True)
                layer_rows = [concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
            else:
                layer_rows = fwd
        states = concat(layer_rows, axis=0) if t > 1 else layer_rows[0]
        return EncoderOutput(states=states, length=t, mask=mask)

    def _run_direction(self, prefix: str, rows: list[Tensor], reverse: bool) -> list[Tensor]:
        units = self.cfg.enc_units
        h = Tensor(np.zeros((1, units)))
        c = Tensor(np.zeros((1, units)))
        order = range(len(rows) - 1, -1, -1) if reverse else range(len(rows))
        out: list[Tensor | None] = [None] * len(rows)
        for i in order:
            h, c = lstm_step(self.params, prefix, rows[i], h, c)
            out[i] = h
        return out  # type: ignore[return-value]

    # ---- speller ----

    def initial_state(self) -> DecoderState:
        hidden = tuple(
            (Tensor(np.zeros((1, self.cfg.dec_units))), Tensor(np.zeros((1, self.cfg.dec_units))))
            for _ in range(self.cfg.dec_layers)
        )
        return DecoderState(hidden=hidden, context=Tensor(np.zeros((1, self.cfg.context_dim))))

    def decode_step(self, state: DecoderState, enc: EncoderOutput,
                    prev_token: int) -> tuple[Tensor, DecoderState, AttentionResult]:
        """Logits over the vocabulary given the previous token."""
        if not 0 <= prev_token < self.cfg.vocab_size:
            raise ShapeError(f"token id {prev_token} outside vocabulary "
                             f"of size {self.cfg.vocab_size}")
        att = attend_additive(self.params, "att", self.cfg.attention_heads,
                              state.top_hidden(), enc.states, enc.mask)
        emb = row(self.params["emb.E"], prev_token)
        x = concat([emb, att.context], axis=1)
        new_hidden = []
        for layer in range(self.cfg.dec_layers):
            h, c = state.hidden[layer]
            h, c = lstm_step(self.params, f"dec{layer}", x, h, c)
            new_hidden.append((h, c))
            x = h
        logits = add(matmul(x, self.params["out.W"]), self.params["out.b"])
        new_state = DecoderState(hidden=tuple(new_hidden), context=att.context)
        return logits, new_state, att

    def sos_id(self) -> int:
        return 0  # reserved id 0 in every vocabulary this package builds

    def step_logits(self, feats: np.ndarray, input_tokens: list[int],
                    enc: EncoderOutput | None = None) -> list[Tensor]:
        """Logit rows for a fixed sequence of decoder inputs."""
        if enc is None:
            enc = self.encode(feats)
        state = self.initial_state()
        out = []
        for tok in input_tokens:
            logits, state, _ = self.decode_step(state, enc, tok)
            out.append(logits)
        return out

    def seq_log_prob(self, feats: np.ndarray, ids: list[int],
                     enc: EncoderOutput | None = None) -> tuple[Tensor, list[Tensor]]:
        """Teacher-forced log P(y|x) and the per-step log-probs."""
        if not ids:
            raise ShapeError("token sequence must be non-empty")
        inputs = [self.sos_id()] + list(ids[:-1])
        step_lps = []
        for logits, target in zip(self.step_logits(feats, inputs, enc=enc), ids):
            lsm = log_softmax(logits, axis=1)
            step_lps.append(get(lsm, (0, int(target))))
        total = step_lps[0]
        for lp in step_lps[1:]:
            total = add(total, lp)
        return total, step_lps


def clone_model(model: Seq2SeqModel) -> Seq2SeqModel:
    return Seq2SeqModel(replace(model.cfg), {k: v.copy() for k, v in model.params.items()})
