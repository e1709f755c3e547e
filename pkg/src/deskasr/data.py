"""Manifests and the prepare pipeline (features + token archives).

A manifest is line-delimited JSON; each record names an utterance and either
points at a PCM-16 WAVE file or embeds a synthetic-utterance spec. ``prepare``
turns records into binary feature files and token-id files, plus an index that
downstream commands consume. Re-running prepare reproduces identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from deskasr.errors import DataError
from deskasr.frontend import (
    FeatureSequence,
    log_mel,
    read_features,
    read_wav,
    stack_downsample,
    write_features,
)
from deskasr.synth import DIGIT_WORDS, synth_utterance
from deskasr.training.loop import Utterance
from deskasr.wordpiece import WordpieceVocab, segment


@dataclass
class ManifestRecord:
    utt_id: str
    transcript: str
    audio: str | None = None
    synth: dict | None = None

    def __post_init__(self):
        if not self.transcript.strip():
            raise DataError(f"{self.utt_id}: empty transcript")
        if (self.audio is None) == (self.synth is None):
            raise DataError(f"{self.utt_id}: need exactly one of 'audio' or 'synth'")


def load_manifest(path: str | Path) -> list[ManifestRecord]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{lineno}: invalid JSON ({e})") from e
        rec = ManifestRecord(
            utt_id=raw.get("utt_id", ""),
            transcript=raw.get("transcript", ""),
            audio=raw.get("audio"),
            synth=raw.get("synth"),
        )
        if not rec.utt_id:
            raise DataError(f"{path}:{lineno}: missing utt_id")
        if rec.utt_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate utt_id {rec.utt_id!r}")
        seen.add(rec.utt_id)
        if rec.audio is not None:
            audio_path = (path.parent / rec.audio) if not Path(rec.audio).is_absolute() else Path(rec.audio)
            if not audio_path.exists():
                raise DataError(f"{path}:{lineno}: audio file missing: {audio_path}")
            rec.audio = str(audio_path)
        if rec.synth is not None:
            for w in rec.synth.get("labels", []):
                if w not in DIGIT_WORDS:
                    raise DataError(f"{path}:{lineno}: unknown synthetic label {w!r}")
        records.append(rec)
    if not records:
        raise DataError(f"{path}: empty manifest")
    return records


def save_manifest(path: str | Path, records: list[dict | ManifestRecord]) -> None:
    lines = []
    for rec in records:
        if isinstance(rec, ManifestRecord):
            d = {"utt_id": rec.utt_id, "transcript": rec.transcript}
            if rec.audio is not None:
                d["audio"] = rec.audio
            if rec.synth is not None:
                d["synth"] = rec.synth
        else:
            d = rec
        lines.append(json.dumps(d, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def record_features(rec: ManifestRecord) -> FeatureSequence:
    """Stacked 320-dim features for one manifest record."""
    if rec.audio is not None:
        base = log_mel(read_wav(rec.audio))
    else:
        spec = rec.synth
        base, _ = synth_utterance(list(spec["labels"]), int(spec["seed"]),
                                  noise_std=float(spec.get("noise_std", 0.35)))
    return stack_downsample(base)


def prepare(records: list[ManifestRecord], out_dir: str | Path,
            vocab: WordpieceVocab) -> list[Utterance]:
    """Write feature/token archives and an index; returns the loaded set."""
    out = Path(out_dir)
    (out / "feats").mkdir(parents=True, exist_ok=True)
    (out / "tokens").mkdir(parents=True, exist_ok=True)
    index = []
    utts = []
    for rec in records:
        feats = record_features(rec)
        feat_path = out / "feats" / f"{rec.utt_id}.feat"
        write_features(feat_path, feats)
        ids = segment(rec.transcript, vocab).ids
        tok_path = out / "tokens" / f"{rec.utt_id}.ids"
        tok_path.write_text(" ".join(str(i) for i in ids) + "\n", encoding="utf-8")
        index.append({"utt_id": rec.utt_id, "feats": f"feats/{rec.utt_id}.feat",
                      "tokens": f"tokens/{rec.utt_id}.ids", "transcript": rec.transcript})
        utts.append(Utterance(utt_id=rec.utt_id, feats=feats.frames,
                              token_ids=ids, transcript=rec.transcript))
    index_path = out / "prepared.jsonl"
    index_path.write_text("\n".join(json.dumps(r, sort_keys=True) for r in index) + "\n",
                          encoding="utf-8")
    return utts


def load_prepared(out_dir: str | Path) -> list[Utterance]:
    out = Path(out_dir)
    index_path = out / "prepared.jsonl"
    if not index_path.exists():
        raise DataError(f"prepared index not found: {index_path} (run prepare first)")
    utts = []
    for line in index_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        feats = read_features(out / rec["feats"])
        ids = [int(x) for x in (out / rec["tokens"]).read_text().split()]
        utts.append(Utterance(utt_id=rec["utt_id"], feats=feats.frames,
                              token_ids=ids, transcript=rec["transcript"]))
    if not utts:
        raise DataError(f"{index_path}: empty prepared set")
    return utts
