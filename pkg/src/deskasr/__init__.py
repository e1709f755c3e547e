"""deskasr: desk-scale attention encoder-decoder speech recognition.

Wordpiece units, multi-head additive attention, label smoothing, scheduled
sampling, synchronous-training stabilizers, expected-word-error fine-tuning,
beam-search N-best decoding and second-pass n-gram rescoring, all on top of a
small tape-based autodiff core.
"""

from deskasr.estimators import (
    LogMelFeaturizer,
    NBestRescorer,
    SpeechRecognizer,
    WordpieceTokenizer,
)
from deskasr.model.config import ModelConfig
from deskasr.training.loop import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "LogMelFeaturizer",
    "ModelConfig",
    "NBestRescorer",
    "SpeechRecognizer",
    "TrainConfig",
    "WordpieceTokenizer",
    "__version__",
]
