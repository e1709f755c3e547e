"""Scikit-learn style facades over the recognition pipeline.

These wrap the functional core so the pieces compose with the wider
ecosystem: ``get_params``/``set_params``/``clone`` work, fitted state lives in
trailing-underscore attributes, and inputs are validated up front.

    feats = LogMelFeaturizer().transform(waveforms)
    tok = WordpieceTokenizer(vocab_size=60).fit(transcripts)
    asr = SpeechRecognizer(tokenizer=tok).fit(feats, transcripts)
    hyps = asr.predict(test_feats)
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin

from deskasr.errors import ConfigError, DataError
from deskasr.frontend import Waveform, log_mel, stack_downsample
from deskasr.lm import NGramLM, RescoreWeights, ScoredText, rescore, tune_weights
from deskasr.metrics import corpus_wer
from deskasr.model.config import ModelConfig
from deskasr.model.seq2seq import Seq2SeqModel
from deskasr.training.loop import (
    TrainConfig,
    TrainState,
    Utterance,
    decode_corpus,
    run_training,
)
from deskasr.validation import check_feature_list, check_text_list, check_waveform_list
from deskasr.wordpiece import WordpieceVocab, detokenize, grapheme_vocab, segment, train_wpm


class LogMelFeaturizer(BaseEstimator, TransformerMixin):
    """Waveform arrays (16 kHz samples in [-1, 1]) to stacked log-mel matrices."""

    def __init__(self, n_mels=80, win_ms=25.0, hop_ms=10.0, stack=True,
                 left_context=3, downsample_rate=3):
        self.n_mels = n_mels
        self.win_ms = win_ms
        self.hop_ms = hop_ms
        self.stack = stack
        self.left_context = left_context
        self.downsample_rate = downsample_rate

    def fit(self, X, y=None):
        return self  # stateless

    def transform(self, X):
        out = []
        for samples in check_waveform_list(X):
            feats = log_mel(Waveform(samples), n_mels=self.n_mels,
                            win_ms=self.win_ms, hop_ms=self.hop_ms)
            if self.stack:
                feats = stack_downsample(feats, left=self.left_context,
                                         rate=self.downsample_rate)
            out.append(feats.frames)
        return out


class WordpieceTokenizer(BaseEstimator, TransformerMixin):
    """Trainable wordpiece segmentation with inverse_transform.

    Training stops early once no merge improves corpus likelihood, so
    ``vocab_size`` is an upper bound on small corpora.
    """

    def __init__(self, vocab_size=500, grapheme=False):
        self.vocab_size = vocab_size
        self.grapheme = grapheme

    def fit(self, X, y=None):
        corpus = check_text_list(X)
        if self.grapheme:
            charset = {c for line in corpus for c in line if not c.isspace()}
            self.vocab_ = grapheme_vocab(charset)
        else:
            self.vocab_ = train_wpm(corpus, self.vocab_size)
        return self

    def transform(self, X):
        self._check_fitted()
        return [segment(text, self.vocab_).ids for text in check_text_list(X)]

    def inverse_transform(self, X):
        self._check_fitted()
        return [detokenize(list(ids), self.vocab_) for ids in X]

    def _check_fitted(self):
        if not hasattr(self, "vocab_"):
            raise ConfigError("WordpieceTokenizer is not fitted; call fit() first")


class SpeechRecognizer(BaseEstimator):
    """fit(feature matrices, transcripts) / predict(feature matrices).

    ``tokenizer`` may be a fitted WordpieceTokenizer; if omitted, one is fit
    on the training transcripts. Model and training settings come from the
    config objects (stored as-is so ``clone`` round-trips them).
    """

    def __init__(self, tokenizer=None, model_config=None, train_config=None,
                 beam_width=8, seed=0):
        self.tokenizer = tokenizer
        self.model_config = model_config
        self.train_config = train_config
        self.beam_width = beam_width
        self.seed = seed

    def fit(self, X, y):
        feats = check_feature_list(X)
        texts = check_text_list(y, name="y")
        if len(feats) != len(texts):
            raise DataError(f"{len(feats)} feature matrices vs {len(texts)} transcripts")
        tok = self.tokenizer
        if tok is None:
            tok = WordpieceTokenizer().fit(texts)
        elif not hasattr(tok, "vocab_"):
            tok = tok.fit(texts)
        self.tokenizer_ = tok
        vocab: WordpieceVocab = tok.vocab_

        base_model = self.model_config or ModelConfig()
        if base_model.feature_dim != feats[0].shape[1]:
            base_model = ModelConfig(**{**base_model.to_dict(),
                                        "feature_dim": feats[0].shape[1]})
        self.model_config_ = ModelConfig(**{**base_model.to_dict(),
                                            "vocab_size": len(vocab)})
        cfg = self.train_config or TrainConfig()
        self.train_config_ = TrainConfig(**{**cfg.to_dict(), "seed": self.seed})

        data = [
            Utterance(utt_id=f"fit-{i:06d}", feats=f,
                      token_ids=segment(t, vocab).ids, transcript=t)
            for i, (f, t) in enumerate(zip(feats, texts))
        ]
        self.model_ = Seq2SeqModel.init(self.model_config_, seed=self.seed)
        self.train_state_ = run_training(
            self.model_, data, self.train_config_, vocab,
            state=TrainState.fresh(self.model_, self.train_config_),
        )
        return self

    def predict(self, X):
        self._check_fitted()
        vocab = self.tokenizer_.vocab_
        feats = check_feature_list(X, dim=self.model_config_.feature_dim)
        data = [Utterance(utt_id=f"pred-{i:06d}", feats=f, token_ids=[vocab.eos_id],
                          transcript="") for i, f in enumerate(feats)]
        nbests = decode_corpus(self.model_, data, vocab, beam_width=self.beam_width,
                               n_best=1)
        return [detokenize(list(nb.top().ids), vocab) for nb in nbests]

    def predict_nbest(self, X, n_best=4):
        self._check_fitted()
        vocab = self.tokenizer_.vocab_
        feats = check_feature_list(X, dim=self.model_config_.feature_dim)
        data = [Utterance(utt_id=f"pred-{i:06d}", feats=f, token_ids=[vocab.eos_id],
                          transcript="") for i, f in enumerate(feats)]
        nbests = decode_corpus(self.model_, data, vocab,
                               beam_width=max(self.beam_width, n_best), n_best=n_best)
        return [
            [ScoredText(text=detokenize(list(h.ids), vocab), am_logprob=h.log_prob,
                        token_ids=h.ids) for h in nb.hypotheses]
            for nb in nbests
        ]

    def score(self, X, y):
        """1 - WER, so greater is better (can go negative on insertions)."""
        refs = [t.split() for t in check_text_list(y, name="y")]
        hyps = [h.split() for h in self.predict(X)]
        return 1.0 - corpus_wer(refs, hyps).rate

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ConfigError("SpeechRecognizer is not fitted; call fit() first")


class NBestRescorer(BaseEstimator):
    """Second-pass reranker: fit tunes (lm_scale, word_reward) on dev data."""

    def __init__(self, lm_corpus=None, lm_order=3, lm_scale=None, word_reward=None):
        self.lm_corpus = lm_corpus
        self.lm_order = lm_order
        self.lm_scale = lm_scale
        self.word_reward = word_reward

    def fit(self, X, y=None):
        """X: list of N-best lists (ScoredText); y: reference transcripts."""
        if self.lm_corpus is None:
            raise ConfigError("NBestRescorer needs lm_corpus text to train on")
        self.lm_ = NGramLM.train(check_text_list(self.lm_corpus, name="lm_corpus"),
                                 order=self.lm_order)
        if self.lm_scale is not None and self.word_reward is not None:
            self.weights_ = RescoreWeights(self.lm_scale, self.word_reward)
        else:
            if y is None:
                raise ConfigError("pass dev references to tune rescoring weights")
            self.weights_ = tune_weights(list(X), check_text_list(y, name="y"), self.lm_)
        return self

    def transform(self, X):
        self._check_fitted()
        return [rescore(list(nbest), self.lm_, self.weights_) for nbest in X]

    def predict(self, X):
        return [ranked[0].text for ranked in self.transform(X)]

    def _check_fitted(self):
        if not hasattr(self, "lm_"):
            raise ConfigError("NBestRescorer is not fitted; call fit() first")
