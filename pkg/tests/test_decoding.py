"""Beam search vs. enumeration, greedy equivalence, and edit-distance oracles."""

from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deskasr.decoding import beam_search, brute_force_decode, greedy_decode
from deskasr.errors import ConfigError
from deskasr.metrics import corpus_wer, word_edit_distance
from deskasr.model import ModelConfig, Seq2SeqModel
from deskasr.training import TrainConfig, Utterance, run_training
from deskasr.wordpiece import WordpieceVocab, MARKER

RNG = np.random.default_rng(9)


def tiny_model(vocab_size=4, seed=0, trained=True):
    cfg = ModelConfig(feature_dim=6, enc_layers=1, enc_units=8, dec_layers=1,
                      dec_units=8, attention_heads=1, attention_dim=6,
                      vocab_size=vocab_size, embedding_dim=4)
    model = Seq2SeqModel.init(cfg, seed=seed)
    if trained:
        # a few steps on arbitrary targets so the distribution is not flat
        rng = np.random.default_rng(seed)
        data = [
            Utterance(utt_id=f"u{i}", feats=rng.normal(size=(3, 6)),
                      token_ids=[2, 3, 1] if i % 2 == 0 else [3, 1], transcript="x")
            for i in range(8)
        ]
        vocab = WordpieceVocab(["<sos>", "<eos>", "<unk>", MARKER + "x"])
        cfg_t = TrainConfig(batch_size=4, ce_steps=15, peak_lr=5e-3, lr_ramp_steps=5,
                            seed=seed, use_scheduled_sampling=False)
        run_training(model, data, cfg_t, vocab)
    return model


class TestBeamSearch:
    def test_degenerate_vocab_matches_enumeration(self):
        # V=2: token 0 plus eos; compare all ranked hypotheses
        model = tiny_model(vocab_size=2, trained=False)
        feats = RNG.normal(size=(3, 6))
        beam = beam_search(model, feats, beam_width=16, n_best=4, max_len=4)
        brute = brute_force_decode(model, feats, max_len=4)
        for b, e in zip(beam.hypotheses, brute[:len(beam.hypotheses)]):
            assert b.ids == e.ids
            assert b.log_prob == pytest.approx(e.log_prob, abs=1e-12)

    def test_top4_matches_brute_force_on_trained_micro_model(self):
        model = tiny_model(vocab_size=4, trained=True)
        feats = np.random.default_rng(5).normal(size=(4, 6))
        beam = beam_search(model, feats, beam_width=256, n_best=4, max_len=4)
        brute = brute_force_decode(model, feats, max_len=4)
        assert len(beam.hypotheses) == 4
        for b, e in zip(beam.hypotheses, brute[:4]):
            assert b.ids == e.ids
            assert abs(b.log_prob - e.log_prob) < 1e-9

    def test_beam_width_one_equals_greedy(self):
        model = tiny_model(vocab_size=5, trained=False)
        for trial in range(5):
            feats = np.random.default_rng(trial).normal(size=(3, 6))
            beam = beam_search(model, feats, beam_width=1, n_best=1, max_len=8)
            greedy = greedy_decode(model, feats, max_len=8)
            assert beam.top().ids == greedy.ids
            assert beam.top().log_prob == pytest.approx(greedy.log_prob, abs=1e-12)

    def test_wider_beam_never_hurts_top1(self):
        model = tiny_model(vocab_size=4, trained=True)
        feats = np.random.default_rng(11).normal(size=(4, 6))
        scores = [beam_search(model, feats, beam_width=w, n_best=1, max_len=5).top().log_prob
                  for w in (1, 2, 4, 8, 16)]
        for a, b in zip(scores, scores[1:]):
            assert b >= a - 1e-12

    def test_scores_match_seq_log_prob(self):
        model = tiny_model(vocab_size=4, trained=True)
        feats = np.random.default_rng(2).normal(size=(3, 6))
        nbest = beam_search(model, feats, beam_width=8, n_best=3, max_len=5)
        bound = model.bind(None)
        for hyp in nbest.hypotheses:
            lp, _ = bound.seq_log_prob(feats, list(hyp.ids))
            assert hyp.log_prob == pytest.approx(lp.item(), abs=1e-9)

    def test_finished_all_end_in_eos(self):
        model = tiny_model(vocab_size=5, trained=False)
        feats = RNG.normal(size=(2, 6))
        nbest = beam_search(model, feats, beam_width=6, n_best=6, max_len=3)
        assert all(h.ids[-1] == 1 for h in nbest.hypotheses)

    def test_bad_widths_rejected(self):
        model = tiny_model(vocab_size=3, trained=False)
        with pytest.raises(ConfigError):
            beam_search(model, RNG.normal(size=(2, 6)), beam_width=2, n_best=4)

    def test_brute_force_guard(self):
        model = tiny_model(vocab_size=4, trained=False)
        with pytest.raises(ConfigError):
            brute_force_decode(model, RNG.normal(size=(2, 6)), max_len=12)


def recursive_edit_distance(ref: tuple, hyp: tuple) -> int:
    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        same = rec(i - 1, j - 1) + (0 if ref[i - 1] == hyp[j - 1] else 1)
        return min(same, rec(i - 1, j) + 1, rec(i, j - 1) + 1)

    return rec(len(ref), len(hyp))


class TestEditDistance:
    def test_identity(self):
        b = word_edit_distance("a b c".split(), "a b c".split())
        assert (b.substitutions, b.insertions, b.deletions) == (0, 0, 0)
        assert b.rate == 0.0

    def test_single_substitution(self):
        b = word_edit_distance("a b c".split(), "a x c".split())
        assert (b.substitutions, b.insertions, b.deletions) == (1, 0, 0)
        assert b.rate == pytest.approx(1 / 3)

    def test_insertion_and_deletion_classified(self):
        ins = word_edit_distance("a b".split(), "a x b".split())
        assert ins.insertions == 1 and ins.errors == 1
        dele = word_edit_distance("a x b".split(), "a b".split())
        assert dele.deletions == 1 and dele.errors == 1

    def test_empty_sequences(self):
        assert word_edit_distance([], []).errors == 0
        assert word_edit_distance(["a"], []).deletions == 1
        assert word_edit_distance([], ["a"]).insertions == 1
        assert word_edit_distance([], ["a"]).rate == 1.0  # max(ref, 1) denominator

    def test_random_pairs_match_recursive_oracle(self):
        rng = np.random.default_rng(0)
        alphabet = list("abcd")
        for _ in range(300):
            ref = tuple(rng.choice(alphabet, size=int(rng.integers(0, 9))))
            hyp = tuple(rng.choice(alphabet, size=int(rng.integers(0, 9))))
            assert word_edit_distance(ref, hyp).errors == recursive_edit_distance(ref, hyp)

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.sampled_from("abc"), max_size=8),
           st.lists(st.sampled_from("abc"), max_size=8))
    def test_hypothesis_matches_oracle_and_symmetry(self, ref, hyp):
        fwd = word_edit_distance(ref, hyp)
        rev = word_edit_distance(hyp, ref)
        assert fwd.errors == recursive_edit_distance(tuple(ref), tuple(hyp))
        assert fwd.errors == rev.errors  # total count symmetric
        assert fwd.insertions == rev.deletions and fwd.deletions == rev.insertions

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from("ab"), max_size=6),
           st.lists(st.sampled_from("ab"), max_size=6),
           st.lists(st.sampled_from("ab"), max_size=6))
    def test_triangle_inequality(self, a, b, c):
        ab = word_edit_distance(a, b).errors
        bc = word_edit_distance(b, c).errors
        ac = word_edit_distance(a, c).errors
        assert ac <= ab + bc


class TestCorpusWer:
    def test_identical_corpora_zero(self):
        refs = [["a", "b"], ["c"]]
        assert corpus_wer(refs, refs).rate == 0.0

    def test_pooled_not_averaged(self):
        refs = [["a"] * 9, ["b"]]
        hyps = [["a"] * 9, ["x"]]
        # pooled: 1 error / 10 words, not mean(0, 1) = 0.5
        assert corpus_wer(refs, hyps).rate == pytest.approx(0.1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            corpus_wer([["a"]], [["a"], ["b"]])
