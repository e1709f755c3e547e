"""Synthetic spoken-digit utterances for the toy recognition task.

Each word in a small closed vocabulary owns a fixed [frames x 80] template
(drawn once from a word-keyed generator); an utterance is the concatenation of
its word blocks separated by short low-energy gaps, plus i.i.d. Gaussian noise.
Everything is keyed on (label sequence, seed) through a SeedSequence, so a
given utterance is reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from deskasr.errors import DataError
from deskasr.frontend import FeatureSequence

DIGIT_WORDS = ("zero", "one", "two", "three", "four", "five",
               "six", "seven", "eight", "nine")

WORD_FRAMES = 9     # 10 ms frames per word block
GAP_FRAMES = 3      # low-energy frames between words and at the edges
FEATURE_DIM = 80
SILENCE_LEVEL = -1.0
TEMPLATE_SEED = 20214  # fixed: templates are part of the task definition


def word_template(word: str, dim: int = FEATURE_DIM, frames: int = WORD_FRAMES) -> np.ndarray:
    """Two-segment spectral signature: each half of the block holds its own
    word-specific pattern, mimicking a coarse phone sequence."""
    if word not in DIGIT_WORDS:
        raise DataError(f"unknown synthetic label: {word!r}")
    rng = np.random.default_rng(np.random.SeedSequence([TEMPLATE_SEED, DIGIT_WORDS.index(word)]))
    first = rng.normal(0.0, 1.0, size=dim)
    second = rng.normal(0.0, 1.0, size=dim)
    half = frames // 2
    return np.concatenate([
        np.tile(first, (half, 1)),
        np.tile(second, (frames - half, 1)),
    ])


def synth_utterance(label_seq: list[str], seed: int, noise_std: float = 0.35,
                    dim: int = FEATURE_DIM) -> tuple[FeatureSequence, str]:
    """Deterministic features + transcript for a sequence of digit words."""
    if not label_seq:
        raise DataError("label sequence must be non-empty")
    for w in label_seq:
        if w not in DIGIT_WORDS:
            raise DataError(f"unknown synthetic label: {w!r}")
    idx = [DIGIT_WORDS.index(w) for w in label_seq]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), *idx]))

    blocks = [np.full((GAP_FRAMES, dim), SILENCE_LEVEL)]
    for w in label_seq:
        blocks.append(word_template(w, dim=dim))
        blocks.append(np.full((GAP_FRAMES, dim), SILENCE_LEVEL))
    frames = np.concatenate(blocks, axis=0)
    frames = frames + rng.normal(0.0, noise_std, size=frames.shape)
    return FeatureSequence(frames=frames, frame_shift_ms=10.0), " ".join(label_seq)


def sample_transcripts(n: int, seed: int, min_words: int = 1, max_words: int = 5,
                       words: tuple[str, ...] = DIGIT_WORDS) -> list[list[str]]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    out = []
    for _ in range(n):
        k = int(rng.integers(min_words, max_words + 1))
        out.append([words[int(rng.integers(len(words)))] for _ in range(k)])
    return out


def make_toy_manifest(n: int, seed: int, prefix: str = "utt", min_words: int = 1,
                      max_words: int = 5, noise_std: float = 0.35) -> list[dict]:
    """Manifest records whose audio is a synthetic spec instead of a file."""
    records = []
    for i, labels in enumerate(sample_transcripts(n, seed, min_words, max_words)):
        records.append({
            "utt_id": f"{prefix}-{i:05d}",
            "synth": {"labels": labels, "seed": int(seed) * 1_000_003 + i,
                      "noise_std": noise_std},
            "transcript": " ".join(labels),
        })
    return records
