"""Position-dependent wordpiece inventory: training, segmentation, detokenization.

Pieces range from single characters up to whole words. Word-initial pieces
carry a marker prefix; every character of the training charset exists both as
a word-begin piece and a word-internal piece, so segmentation can never fail
on in-charset text. Training starts from characters and repeatedly merges the
adjacent pair whose merge most increases the unigram-piece log-likelihood of
the training corpus, stopping at the target size or when no merge helps.
Segmentation is greedy longest-match, deterministic, and context-independent.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from deskasr.errors import ConfigError, DataError

MARKER = "▁"  # prefix on word-initial pieces
SOS, EOS, UNK = "<sos>", "<eos>", "<unk>"
RESERVED = (SOS, EOS, UNK)


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


@dataclass
class TokenSequence:
    """Vocab ids with a terminal eos; positions of unknown-char fallbacks."""

    ids: list[int]
    unknown_positions: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ids)


class WordpieceVocab:
    """Immutable piece inventory with dense ids; reserved symbols come first."""

    def __init__(self, pieces: list[str], train_log_likelihoods: list[float] | None = None):
        if list(pieces[: len(RESERVED)]) != list(RESERVED):
            raise ConfigError(f"first {len(RESERVED)} pieces must be {RESERVED}")
        if len(set(pieces)) != len(pieces):
            raise ConfigError("duplicate pieces in vocabulary")
        self.pieces = list(pieces)
        self.piece_to_id = {p: i for i, p in enumerate(self.pieces)}
        self.sos_id = self.piece_to_id[SOS]
        self.eos_id = self.piece_to_id[EOS]
        self.unk_id = self.piece_to_id[UNK]
        self.train_log_likelihoods = list(train_log_likelihoods or [])
        self._max_piece_len = max((len(p) for p in self.pieces[len(RESERVED):]), default=1)

    def __len__(self) -> int:
        return len(self.pieces)

    def id_to_piece(self, i: int) -> str:
        return self.pieces[i]

    def charset(self) -> set[str]:
        return {p for p in self.pieces[len(RESERVED):] if len(p) == 1 and p != MARKER}

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.pieces) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordpieceVocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise DataError(f"{path}: empty vocab file")
        return cls(lines)


def _char_pieces(charset: set[str]) -> list[str]:
    # every char both word-initially and word-internally; sorted for determinism
    chars = sorted(charset)
    return [MARKER + c for c in chars] + list(chars)


def grapheme_vocab(charset: set[str]) -> WordpieceVocab:
    """Degenerate single-character inventory (the grapheme baseline)."""
    if MARKER in charset:
        raise DataError(f"charset may not contain the marker character {MARKER!r}")
    return WordpieceVocab(list(RESERVED) + _char_pieces(charset))


def _word_counts(corpus: list[str]) -> Counter:
    counts: Counter = Counter()
    for line in corpus:
        for w in normalize_whitespace(line).split(" "):
            if w:
                counts[w] += 1
    return counts


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def _corpus_log_likelihood(piece_counts: Counter) -> float:
    n = sum(piece_counts.values())
    return sum(_xlogx(c) for c in piece_counts.values()) - n * math.log(n)


def train_wpm(corpus: list[str], target_size: int) -> WordpieceVocab:
    """Grow a wordpiece inventory by likelihood-maximizing pair merges."""
    word_counts = _word_counts(corpus)
    if not word_counts:
        raise DataError("corpus has no words")
    charset = {c for w in word_counts for c in w}
    if MARKER in charset:
        raise DataError(f"corpus may not contain the marker character {MARKER!r}")
    base = list(RESERVED) + _char_pieces(charset)
    if target_size < len(base):
        raise ConfigError(
            f"target size {target_size} below minimum {len(base)} "
            f"(2 x {len(charset)} chars + {len(RESERVED)} reserved)"
        )

    # word -> current piece segmentation; merges never cross word boundaries
    segs: dict[str, list[str]] = {
        w: [MARKER + w[0]] + list(w[1:]) for w in word_counts
    }
    piece_counts: Counter = Counter()
    for w, cnt in word_counts.items():
        for p in segs[w]:
            piece_counts[p] += cnt

    pieces = list(base)
    ll_history = [_corpus_log_likelihood(piece_counts)]

    while len(pieces) < target_size:
        pair_counts = _count_adjacent_pairs(segs, word_counts)
        if not pair_counts:
            break
        best_pair, best_gain = None, 0.0
        n_total = sum(piece_counts.values())
        for pair, n_pair in pair_counts.items():
            gain = _merge_gain(piece_counts, n_total, pair, n_pair)
            if gain > best_gain + 1e-12 or (
                best_pair is not None
                and abs(gain - best_gain) <= 1e-12
                and pair < best_pair
            ):
                best_pair, best_gain = pair, gain
        if best_pair is None or best_gain <= 1e-12:
            break
        _apply_merge(segs, best_pair)
        merged = best_pair[0] + best_pair[1]
        piece_counts = Counter()
        for w, cnt in word_counts.items():
            for p in segs[w]:
                piece_counts[p] += cnt
        if merged not in pieces:
            pieces.append(merged)
        ll_history.append(_corpus_log_likelihood(piece_counts))

    return WordpieceVocab(pieces, train_log_likelihoods=ll_history)


def _count_adjacent_pairs(segs: dict[str, list[str]], word_counts: Counter) -> Counter:
    """Pair occurrences as greedy left-to-right merging would consume them.

    Only identical-piece pairs can overlap themselves; a run of r equal pieces
    yields floor(r/2) merges, not r-1.
    """
    pair_counts: Counter = Counter()
    for w, cnt in word_counts.items():
        seq = segs[w]
        n = len(seq)
        i = 0
        while i < n - 1:
            a, b = seq[i], seq[i + 1]
            if a == b:
                j = i
                while j < n and seq[j] == a:
                    j += 1
                pair_counts[(a, a)] += ((j - i) // 2) * cnt
                i = j - 1  # so the pair bridging out of the run is still seen
            else:
                pair_counts[(a, b)] += cnt
                i += 1
    return pair_counts


def _merge_gain(piece_counts: Counter, n_total: int, pair: tuple[str, str], n_pair: int) -> float:
    import math

    a, b = pair
    merged = a + b
    c_a, c_b = piece_counts[a], piece_counts[b]
    c_m = piece_counts.get(merged, 0)
    if a == b:
        new_a = c_a - 2 * n_pair
        delta = _xlogx(new_a) - _xlogx(c_a)
    else:
        delta = (_xlogx(c_a - n_pair) - _xlogx(c_a)) + (_xlogx(c_b - n_pair) - _xlogx(c_b))
    delta += _xlogx(c_m + n_pair) - _xlogx(c_m)
    n_new = n_total - n_pair
    delta -= n_new * math.log(n_new) - n_total * math.log(n_total)
    return delta


def _apply_merge(segs: dict[str, list[str]], pair: tuple[str, str]) -> None:
    a, b = pair
    merged = a + b
    for w, seq in segs.items():
        out = []
        i = 0
        while i < len(seq):
            if i < len(seq) - 1 and seq[i] == a and seq[i + 1] == b:
                out.append(merged)
                i += 2
            else:
                out.append(seq[i])
                i += 1
        segs[w] = out


def segment_word(word: str, vocab: WordpieceVocab) -> tuple[list[int], list[int]]:
    """Greedy longest-match pieces for one word; also reports unk positions."""
    ids: list[int] = []
    unk_pos: list[int] = []
    i = 0
    at_begin = True
    max_len = vocab._max_piece_len
    while i < len(word):
        match = None
        limit = min(max_len, len(word) - i)
        for length in range(limit, 0, -1):
            cand = word[i : i + length]
            if at_begin:
                cand = MARKER + cand
            pid = vocab.piece_to_id.get(cand)
            if pid is not None:
                match = (pid, length)
                break
        if match is None:
            unk_pos.append(len(ids))
            ids.append(vocab.unk_id)
            i += 1
        else:
            ids.append(match[0])
            i += match[1]
        at_begin = False
    return ids, unk_pos


def segment(text: str, vocab: WordpieceVocab) -> TokenSequence:
    """Deterministic greedy segmentation; appends the terminal eos."""
    ids: list[int] = []
    unk_positions: list[int] = []
    for word in normalize_whitespace(text).split(" "):
        if not word:
            continue
        wids, unk = segment_word(word, vocab)
        unk_positions.extend(len(ids) + u for u in unk)
        ids.extend(wids)
    ids.append(vocab.eos_id)
    return TokenSequence(ids=ids, unknown_positions=unk_positions)


def detokenize(tokens: TokenSequence | list[int], vocab: WordpieceVocab) -> str:
    """Inverse of segmentation: spaces before word-begin pieces, markers dropped."""
    ids = tokens.ids if isinstance(tokens, TokenSequence) else list(tokens)
    words: list[str] = []
    current = ""
    started = False
    for pos, i in enumerate(ids):
        if i in (vocab.eos_id, vocab.sos_id):
            continue
        piece = vocab.pieces[i]
        if piece.startswith(MARKER):
            if started:
                words.append(current)
            current = piece[len(MARKER):]
            started = True
        else:
            # the unk fallback may stand alone; anything else is word-internal
            if not started and i != vocab.unk_id:
                warnings.warn(
                    f"word-internal piece {piece!r} at position {pos} starts a word",
                    stacklevel=2,
                )
            started = True
            current += piece
    if started:
        words.append(current)
    return " ".join(words)
