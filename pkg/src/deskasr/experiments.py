"""Experiment presets (E1..E8) and the cumulative-improvement ladder.

Each preset stacks one more technique onto the previous configuration:

    E1 grapheme units, single attention head, plain cross-entropy
    E2 wordpiece units
    E3 + multi-head attention
    E4 + synchronous-training stabilizers (lr ramp, gradient-norm tracker)
    E5 + scheduled sampling
    E6 + label smoothing
    E7 + expected-word-error (MWER) fine-tuning
    E8 + second-pass n-gram LM rescoring

``run_ladder`` trains and scores each preset on the synthetic digit task and
reports WER with the relative improvement over the previous row
(WERR = (prev - cur) / prev). The numbers are toy-task numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from deskasr.data import ManifestRecord, load_manifest, prepare, save_manifest
from deskasr.errors import ConfigError
from deskasr.lm import NGramLM, ScoredText, rescore, tune_weights
from deskasr.metrics import corpus_wer
from deskasr.model.config import ModelConfig
from deskasr.model.seq2seq import Seq2SeqModel
from deskasr.synth import make_toy_manifest
from deskasr.training.loop import (
    TrainConfig,
    TrainState,
    decode_corpus,
    run_training,
    save_training_checkpoint,
)
from deskasr.wordpiece import WordpieceVocab, detokenize, grapheme_vocab, train_wpm


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    grapheme_units: bool = False
    attention_heads: int = 2
    use_sync: bool = False
    use_ss: bool = False
    use_ls: bool = False
    mwer: bool = False
    lm_rescore: bool = False


PRESETS: dict[str, ExperimentPreset] = {
    "E1": ExperimentPreset("E1", "grapheme baseline", grapheme_units=True, attention_heads=1),
    "E2": ExperimentPreset("E2", "wordpiece units", attention_heads=1),
    "E3": ExperimentPreset("E3", "+ multi-head attention"),
    "E4": ExperimentPreset("E4", "+ sync stabilizers", use_sync=True),
    "E5": ExperimentPreset("E5", "+ scheduled sampling", use_sync=True, use_ss=True),
    "E6": ExperimentPreset("E6", "+ label smoothing", use_sync=True, use_ss=True, use_ls=True),
    "E7": ExperimentPreset("E7", "+ mwer fine-tune", use_sync=True, use_ss=True, use_ls=True,
                           mwer=True),
    "E8": ExperimentPreset("E8", "+ lm rescoring", use_sync=True, use_ss=True, use_ls=True,
                           mwer=True, lm_rescore=True),
}

LADDER_ORDER = ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8"]

DEFAULT_MWER_STEPS = 40  # used by E7/E8 when the base config has no fine-tune


def preset_configs(preset: ExperimentPreset, model_cfg: ModelConfig,
                   train_cfg: TrainConfig) -> tuple[ModelConfig, TrainConfig]:
    m = replace(model_cfg, attention_heads=preset.attention_heads)
    t = replace(
        train_cfg,
        use_sync_stabilizers=preset.use_sync,
        sync_replicas=2 if preset.use_sync else 1,
        use_scheduled_sampling=preset.use_ss,
        use_label_smoothing=preset.use_ls,
        mwer_steps=(train_cfg.mwer_steps or DEFAULT_MWER_STEPS) if preset.mwer else 0,
    )
    return m, t


def resolve_preset(name: str) -> ExperimentPreset:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]


@dataclass
class LadderRow:
    preset: str
    description: str
    wer: float
    werr_vs_prev: float | None


def _vocab_for(preset: ExperimentPreset, corpus: list[str], wpm_size: int) -> WordpieceVocab:
    if preset.grapheme_units:
        charset = {c for line in corpus for c in line if not c.isspace()}
        return grapheme_vocab(charset)
    return train_wpm(corpus, wpm_size)


def run_ladder(out_dir: str | Path, presets: list[str] | None = None,
               model_cfg: ModelConfig | None = None, train_cfg: TrainConfig | None = None,
               train_utts: int = 800, dev_utts: int = 100, test_utts: int = 100,
               wpm_size: int = 60, seed: int = 0,
               train_manifest: str | None = None, dev_manifest: str | None = None,
               test_manifest: str | None = None,
               progress=None) -> list[LadderRow]:
    """Train and score each preset; emits ladder.jsonl and ladder.txt.

    Default budgets (800 utterances, 800 CE steps per row) are sized so every
    row is reasonably converged; the full eight-preset run takes around half
    an hour on one CPU. Single-head rows (E1, E2) stay well behind the
    multi-head ones at this scale, so expect the E3 jump to dominate the
    table; the toy numbers do not transfer to real corpora.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    presets = presets or LADDER_ORDER
    model_cfg = model_cfg or ModelConfig()
    train_cfg = train_cfg or TrainConfig(seed=seed, ce_steps=800)

    if train_manifest:
        train_recs = load_manifest(train_manifest)
        dev_recs = load_manifest(dev_manifest) if dev_manifest else train_recs[: len(train_recs) // 5]
        test_recs = load_manifest(test_manifest) if test_manifest else dev_recs
    else:
        train_recs = [ManifestRecord(**r) for r in make_toy_manifest(train_utts, seed, prefix="tr")]
        dev_recs = [ManifestRecord(**r) for r in make_toy_manifest(dev_utts, seed + 1, prefix="dv")]
        test_recs = [ManifestRecord(**r) for r in make_toy_manifest(test_utts, seed + 2, prefix="te")]
        save_manifest(out / "train.jsonl", train_recs)
        save_manifest(out / "dev.jsonl", dev_recs)
        save_manifest(out / "test.jsonl", test_recs)

    corpus = [r.transcript for r in train_recs]
    rows: list[LadderRow] = []
    prev_wer: float | None = None
    for name in presets:
        preset = resolve_preset(name)
        if progress:
            progress(f"[{name}] {preset.description}")
        vocab = _vocab_for(preset, corpus, wpm_size)
        vocab_path = out / f"{name}.vocab"
        vocab.save(vocab_path)
        m_cfg, t_cfg = preset_configs(preset, replace(model_cfg, vocab_size=len(vocab)), train_cfg)

        workdir = out / name
        train_set = prepare(train_recs, workdir / "train", vocab)
        dev_set = prepare(dev_recs, workdir / "dev", vocab)
        test_set = prepare(test_recs, workdir / "test", vocab)

        model = Seq2SeqModel.init(m_cfg, seed=t_cfg.seed)
        state = TrainState.fresh(model, t_cfg)
        log_path = workdir / "train.log.jsonl"
        with open(log_path, "w", encoding="utf-8") as fh:
            run_training(model, train_set, t_cfg, vocab, state=state,
                         log_fn=lambda rec: fh.write(json.dumps(rec, sort_keys=True) + "\n"))
        save_training_checkpoint(workdir / "ckpt-final.bin", model, t_cfg, state)

        n_best = max(4, t_cfg.mwer_nbest) if preset.lm_rescore else 1
        test_nbests = decode_corpus(model, test_set, vocab, beam_width=max(8, n_best),
                                    n_best=n_best)
        if preset.lm_rescore:
            lm = NGramLM.train(corpus, order=3)
            dev_nbests = decode_corpus(model, dev_set, vocab, beam_width=max(8, n_best),
                                       n_best=n_best)
            dev_entries = [
                [ScoredText(text=detokenize(list(h.ids), vocab), am_logprob=h.log_prob,
                            token_ids=h.ids) for h in nb.hypotheses]
                for nb in dev_nbests
            ]
            weights = tune_weights(dev_entries, [u.transcript for u in dev_set], lm)
            (workdir / "rescore_weights.json").write_text(
                json.dumps({"lm_scale": weights.lm_scale,
                            "word_reward": weights.word_reward,
                            "dev_set": dev_manifest or "synthetic dev split"},
                           sort_keys=True))
            hyps = []
            for nb in test_nbests:
                entries = [ScoredText(text=detokenize(list(h.ids), vocab),
                                      am_logprob=h.log_prob, token_ids=h.ids)
                           for h in nb.hypotheses]
                hyps.append(rescore(entries, lm, weights)[0].words)
        else:
            hyps = [detokenize(list(nb.top().ids), vocab).split() for nb in test_nbests]

        wer = corpus_wer([u.ref_words for u in test_set], hyps).rate
        werr = None if prev_wer is None else ((prev_wer - wer) / prev_wer if prev_wer > 0 else 0.0)
        rows.append(LadderRow(preset=name, description=preset.description,
                              wer=wer, werr_vs_prev=werr))
        prev_wer = wer

    _write_ladder_report(out, rows)
    return rows


def format_ladder(rows: list[LadderRow]) -> str:
    lines = [f"{'Exp':<5}{'Model':<28}{'WER':>8}  {'WERR':>7}"]
    for r in rows:
        werr = "-" if r.werr_vs_prev is None else f"{100 * r.werr_vs_prev:.1f}%"
        lines.append(f"{r.preset:<5}{r.description:<28}{100 * r.wer:>7.2f}%  {werr:>7}")
    return "\n".join(lines)


def _write_ladder_report(out: Path, rows: list[LadderRow]) -> None:
    (out / "ladder.jsonl").write_text(
        "\n".join(json.dumps({"preset": r.preset, "description": r.description,
                              "wer": r.wer, "werr_vs_prev": r.werr_vs_prev},
                             sort_keys=True) for r in rows) + "\n",
        encoding="utf-8",
    )
    (out / "ladder.txt").write_text(format_ladder(rows) + "\n", encoding="utf-8")
