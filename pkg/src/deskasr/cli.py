"""Command-line experiment runner.

Subcommands: prepare, wpm-train, wpm-encode, wpm-decode, train, decode,
rescore, eval, ladder. Configuration precedence is CLI override > --config
file > preset default. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from deskasr import experiments
from deskasr.data import load_manifest, load_prepared, prepare
from deskasr.errors import ConfigError, DataError, DeskAsrError
from deskasr.lm import ArpaLM, RescoreWeights, ScoredText, rescore
from deskasr.metrics import corpus_wer, word_edit_distance
from deskasr.model.config import ModelConfig
from deskasr.model.seq2seq import Seq2SeqModel
from deskasr.training.loop import (
    TrainConfig,
    TrainState,
    decode_corpus,
    load_training_checkpoint,
    run_training,
    save_training_checkpoint,
)
from deskasr.wordpiece import WordpieceVocab, detokenize, segment, train_wpm


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return cfg


def _parse_overrides(pairs: list[str]) -> dict:
    """--set section.key=value overrides, e.g. --set train.peak_lr=0.001"""
    out: dict = {}
    for pair in pairs or []:
        if "=" not in pair or "." not in pair.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        section, field = key.split(".", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        out.setdefault(section, {})[field] = parsed
    return out


def build_configs(args) -> tuple[ModelConfig, TrainConfig]:
    """preset defaults < config file < --set overrides < --seed flag."""
    model_d = ModelConfig().to_dict()
    train_d = TrainConfig().to_dict()
    file_cfg = _load_config_file(getattr(args, "config", None))
    for section, target in (("model", model_d), ("train", train_d)):
        for k, v in file_cfg.get(section, {}).items():
            if k not in target:
                raise ConfigError(f"unknown {section} config field {k!r}")
            target[k] = v
    overrides = _parse_overrides(getattr(args, "set", None))
    for section, target in (("model", model_d), ("train", train_d)):
        for k, v in overrides.get(section, {}).items():
            if k not in target:
                raise ConfigError(f"unknown {section} config field {k!r}")
            target[k] = v
    if getattr(args, "seed", None) is not None:
        train_d["seed"] = args.seed
    model_cfg = ModelConfig.from_dict(model_d)
    train_cfg = TrainConfig.from_dict(train_d)
    preset_name = getattr(args, "preset", None)
    if preset_name:
        preset = experiments.resolve_preset(preset_name)
        model_cfg, train_cfg = experiments.preset_configs(preset, model_cfg, train_cfg)
    return model_cfg, train_cfg


# ---- subcommands ----

def cmd_prepare(args) -> int:
    records = load_manifest(args.manifest)
    vocab = WordpieceVocab.load(args.vocab)
    utts = prepare(records, args.out, vocab)
    print(f"prepared {len(utts)} utterances into {args.out}")
    return 0


def cmd_wpm_train(args) -> int:
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise DataError(f"corpus not found: {corpus_path}")
    corpus = [l for l in corpus_path.read_text(encoding="utf-8").splitlines() if l.strip()]
    vocab = train_wpm(corpus, args.size)
    vocab.save(args.out)
    print(f"trained {len(vocab)} pieces -> {args.out}")
    return 0


def cmd_wpm_encode(args) -> int:
    vocab = WordpieceVocab.load(args.vocab)
    lines = (Path(args.input).read_text(encoding="utf-8").splitlines()
             if args.input else [args.text or ""])
    for line in lines:
        toks = segment(line, vocab)
        print(" ".join(str(i) for i in toks.ids))
    return 0


def cmd_wpm_decode(args) -> int:
    vocab = WordpieceVocab.load(args.vocab)
    lines = (Path(args.input).read_text(encoding="utf-8").splitlines()
             if args.input else [args.ids or ""])
    for line in lines:
        ids = [int(x) for x in line.split()]
        print(detokenize(ids, vocab))
    return 0


def cmd_train(args) -> int:
    model_cfg, train_cfg = build_configs(args)
    data = load_prepared(args.data)
    vocab = WordpieceVocab.load(args.vocab)
    model_cfg = replace(model_cfg, vocab_size=len(vocab))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.resume:
        model, train_cfg, state = load_training_checkpoint(args.resume)
    else:
        model = Seq2SeqModel.init(model_cfg, seed=train_cfg.seed)
        state = TrainState.fresh(model, train_cfg)

    log_path = out / "train.log.jsonl"
    ckpt_path = out / "ckpt-final.bin"
    with open(log_path, "a" if args.resume else "w", encoding="utf-8") as fh:
        def log_fn(rec: dict) -> None:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            if not args.quiet and rec["step"] % max(1, args.log_every) == 0:
                print(f"step {rec['step']:>6} {rec['phase']:<4} loss {rec['loss']:.4f} "
                      f"lr {rec['lr']:.2e} accepted {rec['accepted']}")

        def checkpoint_fn(step: int) -> None:
            save_training_checkpoint(out / f"ckpt-{step:06d}.bin", model, train_cfg, state)

        run_training(model, data, train_cfg, vocab, state=state, log_fn=log_fn,
                     checkpoint_fn=checkpoint_fn)
    save_training_checkpoint(ckpt_path, model, train_cfg, state)
    print(f"final checkpoint: {ckpt_path}")
    return 0


def cmd_decode(args) -> int:
    model, _, _ = load_training_checkpoint(args.checkpoint)
    data = load_prepared(args.data)
    vocab = WordpieceVocab.load(args.vocab)
    nbests = decode_corpus(model, data, vocab, beam_width=args.beam_width,
                           n_best=args.nbest, max_len=args.max_len)
    lines = []
    for nb in nbests:
        for rank, hyp in enumerate(nb.hypotheses, 1):
            text = detokenize(list(hyp.ids), vocab)
            lines.append(f"{nb.utt_id} {rank} {hyp.log_prob:.8f}\t{text}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} hypotheses for {len(nbests)} utterances -> {args.out}")
    return 0


def read_nbest_file(path: str | Path) -> dict[str, list[ScoredText]]:
    out: dict[str, list[ScoredText]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        head, _, text = line.partition("\t")
        parts = head.split()
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 'utt_id rank log_prob<TAB>text'")
        utt_id, _, lp = parts
        out.setdefault(utt_id, []).append(ScoredText(text=text, am_logprob=float(lp)))
    if not out:
        raise DataError(f"{path}: empty N-best file")
    return out


def cmd_rescore(args) -> int:
    nbests = read_nbest_file(args.nbest)
    lm = ArpaLM.read(args.lm)
    weights = RescoreWeights(lm_scale=args.lm_scale, word_reward=args.word_reward)
    lines = []
    for utt_id in nbests:
        best = rescore(nbests[utt_id], lm, weights)[0]
        lines.append(f"{utt_id}\t{best.text}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"rescored {len(lines)} utterances -> {args.out}")
    return 0


def _read_trn(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt_id, _, text = line.partition("\t")
        out[utt_id.strip()] = text.strip()
    if not out:
        raise DataError(f"{path}: no transcripts")
    return out


def cmd_eval(args) -> int:
    hyps = _read_trn(args.hyps)
    refs = _read_trn(args.refs)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise DataError(f"hypotheses missing for {len(missing)} utterances, e.g. {missing[:3]}")
    ids = sorted(refs)
    breakdown = corpus_wer([refs[i].split() for i in ids], [hyps[i].split() for i in ids])
    report = {
        "utterances": len(ids),
        "ref_words": breakdown.ref_words,
        "substitutions": breakdown.substitutions,
        "insertions": breakdown.insertions,
        "deletions": breakdown.deletions,
        "wer": breakdown.rate,
    }
    if args.baseline:
        base_hyps = _read_trn(args.baseline)
        base = corpus_wer([refs[i].split() for i in ids],
                          [base_hyps.get(i, "").split() for i in ids])
        report["baseline_wer"] = base.rate
        report["werr"] = (base.rate - breakdown.rate) / base.rate if base.rate > 0 else 0.0
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.per_utt:
        for i in ids:
            b = word_edit_distance(refs[i].split(), hyps[i].split())
            print(f"{i}\tS={b.substitutions} I={b.insertions} D={b.deletions} "
                  f"wer={b.rate:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return 0


def cmd_ladder(args) -> int:
    customized = bool(args.set or args.config or args.preset)
    model_cfg, train_cfg = build_configs(args)
    rows = experiments.run_ladder(
        args.out,
        presets=args.presets.split(",") if args.presets else None,
        model_cfg=model_cfg,
        # without explicit settings, let the ladder pick its own budgets
        train_cfg=train_cfg if customized else None,
        train_utts=args.train_utts,
        dev_utts=args.dev_utts,
        test_utts=args.test_utts,
        wpm_size=args.wpm_size,
        seed=train_cfg.seed,
        train_manifest=args.train_manifest,
        dev_manifest=args.dev_manifest,
        test_manifest=args.test_manifest,
        progress=None if args.quiet else print,
    )
    print(experiments.format_ladder(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskasr",
                                     description="Desk-scale attention encoder-decoder ASR")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="training seed override")
        p.add_argument("--config", help="JSON config file with model/train sections")
        p.add_argument("--preset", help="experiment preset (E1..E8)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config field")

    p = sub.add_parser("prepare", help="features + tokens from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_prepare)

    p = sub.add_parser("wpm-train", help="train a wordpiece inventory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_wpm_train)

    p = sub.add_parser("wpm-encode", help="segment text to token ids")
    p.add_argument("--vocab", required=True)
    p.add_argument("--input", help="text file, one sentence per line")
    p.add_argument("--text", help="a single sentence")
    p.set_defaults(fn=cmd_wpm_encode)

    p = sub.add_parser("wpm-decode", help="token ids back to text")
    p.add_argument("--vocab", required=True)
    p.add_argument("--input", help="id file, one sequence per line")
    p.add_argument("--ids", help="a single id sequence")
    p.set_defaults(fn=cmd_wpm_decode)

    p = sub.add_parser("train", help="run the CE (and optional MWER) phases")
    common(p)
    p.add_argument("--data", required=True, help="prepared directory")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--log-every", type=int, default=20)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("decode", help="beam-search N-best decoding")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam-width", type=int, default=8)
    p.add_argument("--nbest", type=int, default=4)
    p.add_argument("--max-len", type=int, default=None)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("rescore", help="second-pass LM rescoring of an N-best file")
    p.add_argument("--nbest", required=True)
    p.add_argument("--lm", required=True, help="ARPA LM file")
    p.add_argument("--lm-scale", type=float, default=0.0)
    p.add_argument("--word-reward", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rescore)

    p = sub.add_parser("eval", help="corpus WER of hypothesis vs reference transcripts")
    p.add_argument("--hyps", required=True, help="utt_id<TAB>text lines")
    p.add_argument("--refs", required=True)
    p.add_argument("--baseline", help="baseline hyps for a WERR column")
    p.add_argument("--per-utt", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ladder", help="cumulative-improvement preset ladder on the toy task")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--presets", help="comma-separated subset, e.g. E1,E2,E3")
    p.add_argument("--train-utts", type=int, default=800)
    p.add_argument("--dev-utts", type=int, default=100)
    p.add_argument("--test-utts", type=int, default=100)
    p.add_argument("--wpm-size", type=int, default=60)
    p.add_argument("--train-manifest")
    p.add_argument("--dev-manifest")
    p.add_argument("--test-manifest")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_ladder)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except DeskAsrError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
