"""Word-level edit distance and corpus WER."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass
class WerBreakdown:
    substitutions: int
    insertions: int
    deletions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        return self.errors / max(self.ref_words, 1)

    def __add__(self, other: "WerBreakdown") -> "WerBreakdown":
        return WerBreakdown(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.ref_words + other.ref_words,
        )


def word_edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> WerBreakdown:
    """Levenshtein alignment with unit costs.

    Backtrace ties prefer substitution, then deletion, then insertion.
    Deletions are reference words absent from the hypothesis; insertions are
    extra hypothesis words.
    """
    m, n = len(ref), len(hyp)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dp[i][0] = i
    for j in range(1, n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        row_prev, row_cur = dp[i - 1], dp[i]
        for j in range(1, n + 1):
            if ref[i - 1] == hyp[j - 1]:
                row_cur[j] = row_prev[j - 1]
            else:
                row_cur[j] = 1 + min(row_prev[j - 1], row_prev[j], row_cur[j - 1])

    subs = ins = dels = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerBreakdown(substitutions=subs, insertions=ins, deletions=dels, ref_words=m)


def corpus_wer(refs: Sequence[Sequence[str]], hyps: Sequence[Sequence[str]]) -> WerBreakdown:
    """Pooled counts: total errors over total reference words."""
    if len(refs) != len(hyps):
        raise ValueError(f"got {len(refs)} references but {len(hyps)} hypotheses")
    total = WerBreakdown(0, 0, 0, 0)
    for r, h in zip(refs, hyps):
        total = total + word_edit_distance(r, h)
    return total
