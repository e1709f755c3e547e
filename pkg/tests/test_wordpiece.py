"""Wordpiece training, greedy segmentation, and round-trip properties."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deskasr.errors import ConfigError, DataError
from deskasr.wordpiece import (
    MARKER,
    WordpieceVocab,
    detokenize,
    grapheme_vocab,
    normalize_whitespace,
    segment,
    train_wpm,
)


def small_vocab():
    # pieces: reserved + begin/internal chars + two merges, hand-built
    return WordpieceVocab(["<sos>", "<eos>", "<unk>",
                           MARKER + "a", MARKER + "b", "a", "b",
                           MARKER + "ab"])


class TestTraining:
    def test_repeated_word_gets_merged_to_one_piece(self):
        corpus = ["aa aa aa"]
        vocab = train_wpm(corpus, target_size=12)
        assert MARKER + "aa" in vocab.pieces

    def test_merge_gain_matches_direct_two_piece_computation(self):
        # one word "ab" repeated: merging (marker+a, b) collapses every token
        # pair; the direct likelihood of the merged corpus must match
        corpus = ["ab ab ab ab"]
        vocab = train_wpm(corpus, target_size=12)
        assert MARKER + "ab" in vocab.pieces
        # merged segmentation is a single piece per word: LL = 4 * log(4/4) = 0
        assert abs(vocab.train_log_likelihoods[-1] - 0.0) < 1e-12

    def test_single_char_corpus_is_chars_plus_reserved(self):
        vocab = train_wpm(["a a a"], target_size=50)
        assert vocab.pieces == ["<sos>", "<eos>", "<unk>", MARKER + "a", "a"]

    def test_piece_count_never_exceeds_target(self):
        corpus = ["the cat sat on the mat", "the cat ran"] * 3
        vocab = train_wpm(corpus, target_size=40)
        assert len(vocab) <= 40

    def test_likelihood_monotone_nondecreasing(self):
        corpus = ["three seven three", "seven seven nine", "one two three"] * 5
        vocab = train_wpm(corpus, target_size=60)
        ll = vocab.train_log_likelihoods
        assert len(ll) >= 2
        assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))

    def test_target_too_small_rejected(self):
        with pytest.raises(ConfigError):
            train_wpm(["abc"], target_size=5)

    def test_marker_in_corpus_rejected(self):
        with pytest.raises(DataError):
            train_wpm([f"bad{MARKER}word"], target_size=50)

    def test_charset_coverage_both_positions(self):
        corpus = ["hello world"]
        vocab = train_wpm(corpus, target_size=60)
        for c in set("helloworld"):
            assert MARKER + c in vocab.pieces
            assert c in vocab.pieces


class TestSegment:
    def test_greedy_longest_match_trace(self):
        # "aba": begin pieces {marker+a, marker+ab}; greedy takes marker+ab then a
        vocab = small_vocab()
        toks = segment("aba", vocab)
        pieces = [vocab.pieces[i] for i in toks.ids]
        assert pieces == [MARKER + "ab", "a", "<eos>"]

    def test_empty_text_is_just_eos(self):
        vocab = small_vocab()
        toks = segment("", vocab)
        assert toks.ids == [vocab.eos_id]

    def test_deterministic_and_context_independent(self):
        # a sentence segments as the concatenation of its words' segmentations
        vocab = train_wpm(["abab baba abba"], target_size=30)
        w1 = segment("baba", vocab).ids[:-1]
        w2 = segment("abab", vocab).ids[:-1]
        w3 = segment("abba", vocab).ids[:-1]
        sentence = segment("baba abab abba", vocab).ids
        assert sentence == w1 + w2 + w3 + [vocab.eos_id]

    def test_unknown_char_flagged_and_mapped(self):
        vocab = small_vocab()
        toks = segment("axb", vocab)
        assert vocab.unk_id in toks.ids
        assert toks.unknown_positions

    def test_exactly_one_eos_at_end(self):
        vocab = train_wpm(["one two three"], target_size=40)
        toks = segment("two three", vocab)
        assert toks.ids.count(vocab.eos_id) == 1
        assert toks.ids[-1] == vocab.eos_id


class TestDetokenize:
    def test_word_boundary_spacing(self):
        vocab = small_vocab()
        ids = [vocab.piece_to_id[MARKER + "ab"], vocab.piece_to_id["a"],
               vocab.piece_to_id[MARKER + "b"]]
        assert detokenize(ids, vocab) == "aba b"

    def test_eos_only_is_empty(self):
        vocab = small_vocab()
        assert detokenize([vocab.eos_id], vocab) == ""

    def test_internal_piece_at_start_warns_best_effort(self):
        vocab = small_vocab()
        with pytest.warns(UserWarning):
            out = detokenize([vocab.piece_to_id["a"]], vocab)
        assert out == "a"


class TestRoundTrip:
    def test_round_trip_over_training_corpus(self):
        corpus = ["three seven three", "nine one", "seven seven seven",
                  "eight two four six", "five zero"]
        vocab = train_wpm(corpus, target_size=70)
        for line in corpus:
            assert detokenize(segment(line, vocab), vocab) == normalize_whitespace(line)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.text(alphabet="abcde", min_size=1, max_size=8),
                    min_size=0, max_size=6))
    def test_round_trip_random_words(self, words):
        vocab = train_wpm(["abc de ace bed", "cab bade"], target_size=40)
        text = " ".join(words)
        assert detokenize(segment(text, vocab), vocab) == normalize_whitespace(text)

    def test_grapheme_vocab_round_trip(self):
        vocab = grapheme_vocab(set("abcxyz"))
        for text in ["abc xyz", "a", "zzz ab cx"]:
            assert detokenize(segment(text, vocab), vocab) == text


class TestVocabFile:
    def test_save_load_round_trip(self, tmp_path):
        vocab = train_wpm(["six seven six", "one six"], target_size=40)
        path = tmp_path / "pieces.vocab"
        vocab.save(path)
        back = WordpieceVocab.load(path)
        assert back.pieces == vocab.pieces
        assert back.piece_to_id == vocab.piece_to_id

    def test_reserved_symbols_on_fixed_first_lines(self, tmp_path):
        vocab = grapheme_vocab(set("ab"))
        path = tmp_path / "g.vocab"
        vocab.save(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[:3] == ["<sos>", "<eos>", "<unk>"]
