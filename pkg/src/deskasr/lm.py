"""Backoff n-gram word LM (Witten-Bell interpolated) and second-pass rescoring.

The rescorer reranks first-pass hypotheses by

    am_logprob + lm_scale * lm_logprob + word_reward * word_count

with the two scales tuned by grid search on a development set. The LM
interpolates each order with the next lower one using Witten-Bell weights
(type counts), which keeps every conditional distribution exactly normalized;
the bottom of the recursion is a uniform distribution over the closed
vocabulary plus the unknown symbol.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from deskasr.errors import ConfigError, DataError

BOS, EOS_WORD, UNK_WORD = "<s>", "</s>", "<unk>"
_PSEUDO_LOG10 = -99.0  # conventional stand-in for never-predicted symbols


class NGramLM:
    """Witten-Bell interpolated n-gram model over words."""

    def __init__(self, order: int, context_counts: dict[tuple[str, ...], Counter],
                 vocab: list[str]):
        self.order = order
        self.context_counts = context_counts
        self.vocab = list(vocab)  # predictable symbols: words + </s> + <unk>
        self._vocab_set = set(self.vocab)
        self._totals = {h: sum(c.values()) for h, c in context_counts.items()}

    # ---- training ----

    @classmethod
    def train(cls, corpus: list[str], order: int = 3) -> "NGramLM":
        if order < 1:
            raise ConfigError(f"order must be >= 1, got {order}")
        sentences = [line.split() for line in corpus if line.split()]
        if not sentences:
            raise DataError("LM corpus has no sentences")
        context_counts: dict[tuple[str, ...], Counter] = {}
        for words in sentences:
            padded = [BOS] * (order - 1) + words + [EOS_WORD]
            for i in range(order - 1, len(padded)):
                w = padded[i]
                for k in range(order):
                    h = tuple(padded[i - k : i])
                    context_counts.setdefault(h, Counter())[w] += 1
        seen = sorted(context_counts[()].keys())
        vocab = seen + ([UNK_WORD] if UNK_WORD not in context_counts[()] else [])
        return cls(order=order, context_counts=context_counts, vocab=vocab)

    # ---- scoring ----

    def map_word(self, w: str) -> str:
        return w if w in self._vocab_set else UNK_WORD

    def prob(self, word: str, history: tuple[str, ...]) -> float:
        """Interpolated P(word | history); histories longer than order-1 are
        truncated from the left."""
        word = self.map_word(word)
        history = tuple(self.map_word(h) if h != BOS else BOS for h in history)
        history = history[len(history) - (self.order - 1):] if self.order > 1 else ()
        return self._prob_backoff(word, history)

    def _prob_backoff(self, word: str, history: tuple[str, ...]) -> float:
        if not history:
            counter = self.context_counts[()]
            n = self._totals[()]
            t = len(counter)
            uniform = 1.0 / len(self.vocab)
            return (counter.get(word, 0) + t * uniform) / (n + t)
        counter = self.context_counts.get(history)
        if counter is None:
            return self._prob_backoff(word, history[1:])
        n = self._totals[history]
        t = len(counter)
        lower = self._prob_backoff(word, history[1:])
        return (counter.get(word, 0) + t * lower) / (n + t)

    def backoff_weight(self, history: tuple[str, ...]) -> float:
        counter = self.context_counts.get(history)
        if counter is None:
            return 1.0
        n, t = self._totals[history], len(counter)
        return t / (n + t)

    def log_prob(self, words: list[str]) -> float:
        """Natural-log probability of a sentence, end-of-sentence included."""
        history = tuple([BOS] * (self.order - 1))
        total = 0.0
        for w in list(words) + [EOS_WORD]:
            total += math.log(self.prob(w, history))
            if self.order > 1:
                history = (history + (self.map_word(w),))[1:]
        return total

    # ---- ARPA round trip ----

    def write_arpa(self, path: str | Path) -> None:
        """Standard ARPA text: log10 probs, backoff weights on context entries."""
        entries: list[dict[tuple[str, ...], tuple[float | None, float | None]]] = [
            {} for _ in range(self.order)
        ]
        for h, counter in self.context_counts.items():
            for w in counter:
                ng = h + (w,)
                lp = math.log10(self._prob_backoff(w, h))
                prev = entries[len(ng) - 1].get(ng, (None, None))
                entries[len(ng) - 1][ng] = (lp, prev[1])
        # every context with counts carries its interpolation weight
        for h in self.context_counts:
            if 0 < len(h) < self.order:
                bow = math.log10(self.backoff_weight(h))
                prev = entries[len(h) - 1].get(h, (None, None))
                entries[len(h) - 1][h] = (prev[0], bow)
        # unigram section must cover the full predictable vocab plus <s>
        for w in self.vocab:
            if (w,) not in entries[0]:
                lp = math.log10(self._prob_backoff(w, ()))
                entries[0][(w,)] = (lp, entries[0].get((w,), (None, None))[1])
        if self.order > 1 and (BOS,) not in entries[0]:
            entries[0][(BOS,)] = (None, None)

        lines = ["\\data\\"]
        for k in range(self.order):
            lines.append(f"ngram {k + 1}={len(entries[k])}")
        for k in range(self.order):
            lines.append("")
            lines.append(f"\\{k + 1}-grams:")
            for ng in sorted(entries[k]):
                lp, bow = entries[k][ng]
                lp_s = f"{(_PSEUDO_LOG10 if lp is None else lp):.12g}"
                line = f"{lp_s}\t{' '.join(ng)}"
                if bow is not None:
                    line += f"\t{bow:.12g}"
                lines.append(line)
        lines += ["", "\\end\\", ""]
        Path(path).write_text("\n".join(lines), encoding="utf-8")


class ArpaLM:
    """Reader for ARPA files; scores with standard backoff arithmetic."""

    def __init__(self, order: int, tables: list[dict[tuple[str, ...], tuple[float, float | None]]]):
        self.order = order
        self.tables = tables
        self.vocab = [ng[0] for ng in tables[0]
                      if ng[0] not in (BOS,)]

    @classmethod
    def read(cls, path: str | Path) -> "ArpaLM":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        it = iter(lines)
        for line in it:
            if line.strip() == "\\data\\":
                break
        else:
            raise DataError(f"{path}: missing \\data\\ header")
        sizes = []
        for line in it:
            line = line.strip()
            if not line:
                break
            if line.startswith("ngram"):
                sizes.append(int(line.split("=")[1]))
        order = len(sizes)
        tables: list[dict] = [{} for _ in range(order)]
        current = None
        for line in it:
            line = line.strip()
            if not line:
                continue
            if line == "\\end\\":
                break
            if line.startswith("\\") and line.endswith("-grams:"):
                current = int(line[1:].split("-")[0]) - 1
                continue
            if current is None:
                raise DataError(f"{path}: n-gram entry before any section header")
            parts = line.split("\t")
            if len(parts) >= 2:
                lp = float(parts[0])
                ng = tuple(parts[1].split())
                bow = float(parts[2]) if len(parts) > 2 else None
            else:
                # space-separated fallback; section order disambiguates the bow
                fields = line.split()
                lp = float(fields[0])
                if len(fields) == current + 3:
                    ng, bow = tuple(fields[1:-1]), float(fields[-1])
                else:
                    ng, bow = tuple(fields[1:]), None
            if len(ng) != current + 1:
                raise DataError(f"{path}: {len(ng)}-gram in the {current + 1}-gram section")
            tables[current][ng] = (lp, bow)
        return cls(order=order, tables=tables)

    def map_word(self, w: str) -> str:
        return w if (w,) in self.tables[0] else UNK_WORD

    def _cond_log10(self, word: str, history: tuple[str, ...]) -> float:
        history = history[max(0, len(history) - (self.order - 1)):]
        while True:
            ng = history + (word,)
            entry = self.tables[len(ng) - 1].get(ng)
            if entry is not None and entry[0] is not None and entry[0] > _PSEUDO_LOG10:
                return entry[0]
            if not history:
                if entry is None:
                    raise DataError(f"word {word!r} missing from unigrams")
                return entry[0]
            ctx = self.tables[len(history) - 1].get(history)
            bow = ctx[1] if ctx is not None and ctx[1] is not None else 0.0
            return bow + self._cond_log10(word, history[1:])

    def log_prob(self, words: list[str]) -> float:
        history = tuple([BOS] * (self.order - 1))
        total = 0.0
        for w in [self.map_word(x) for x in words] + [EOS_WORD]:
            total += self._cond_log10(w, history) * math.log(10.0)
            if self.order > 1:
                history = (history + (w,))[1:]
        return total


# ---- rescoring ----

@dataclass
class RescoreWeights:
    lm_scale: float = 0.0
    word_reward: float = 0.0


@dataclass
class ScoredText:
    """One N-best entry after detokenization."""

    text: str
    am_logprob: float
    token_ids: tuple[int, ...] = ()

    @property
    def words(self) -> list[str]:
        return self.text.split()


def combined_score(entry: ScoredText, lm, weights: RescoreWeights) -> float:
    score = entry.am_logprob
    if weights.lm_scale != 0.0:
        score += weights.lm_scale * lm.log_prob(entry.words)
    score += weights.word_reward * len(entry.words)
    return score


def rescore(entries: list[ScoredText], lm, weights: RescoreWeights) -> list[ScoredText]:
    """Stable re-sort by the combined score; ties fall back to the first-pass
    score, then ascending token ids."""
    keyed = [(combined_score(e, lm, weights), e) for e in entries]
    keyed.sort(key=lambda p: (-p[0], -p[1].am_logprob, p[1].token_ids))
    return [e for _, e in keyed]


def tune_weights(dev_nbests: list[list[ScoredText]], dev_refs: list[str],
                 lm, lam_grid: list[float] | None = None,
                 gamma_grid: list[float] | None = None) -> RescoreWeights:
    """Exhaustive grid search minimizing rescored top-1 corpus WER.

    Ties prefer smaller |lm_scale|, then smaller |word_reward|; the (0, 0)
    point is always in the grid, so tuning can never be worse than no
    rescoring on the development set.
    """
    from deskasr.metrics import corpus_wer

    lam_grid = lam_grid if lam_grid is not None else [round(0.1 * i, 10) for i in range(11)]
    gamma_grid = gamma_grid if gamma_grid is not None else [round(0.1 * i, 10) for i in range(11)]
    if 0.0 not in lam_grid:
        lam_grid = [0.0] + list(lam_grid)
    if 0.0 not in gamma_grid:
        gamma_grid = [0.0] + list(gamma_grid)
    refs = [r.split() for r in dev_refs]
    # LM scores and word counts are weight-independent; precompute once
    cached = [[(e, lm.log_prob(e.words), len(e.words)) for e in nbest]
              for nbest in dev_nbests]
    best: tuple[float, float, float] | None = None  # (wer, |lam|, |gamma|)
    best_w = RescoreWeights()
    for lam in lam_grid:
        for gamma in gamma_grid:
            hyps = []
            for nbest in cached:
                ranked = sorted(
                    nbest,
                    key=lambda p: (-(p[0].am_logprob + lam * p[1] + gamma * p[2]),
                                   -p[0].am_logprob, p[0].token_ids),
                )
                hyps.append(ranked[0][0].words)
            wer = corpus_wer(refs, hyps).rate
            key = (wer, abs(lam), abs(gamma))
            if best is None or key < best:
                best = key
                best_w = RescoreWeights(lm_scale=lam, word_reward=gamma)
    return best_w
