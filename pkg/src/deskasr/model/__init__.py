from deskasr.model.attention import (
    AttentionResult,
    attend_additive,
    attend_additive_single,
    attention_param_arrays,
)
from deskasr.model.config import (
    ModelConfig,
    full_scale_bidirectional,
    full_scale_unidirectional,
    micro_config,
)
from deskasr.model.lstm import lstm_param_arrays, lstm_step
from deskasr.model.seq2seq import (
    BoundModel,
    DecoderState,
    EncoderOutput,
    Seq2SeqModel,
    clone_model,
)

__all__ = [
    "AttentionResult",
    "BoundModel",
    "DecoderState",
    "EncoderOutput",
    "ModelConfig",
    "Seq2SeqModel",
    "attend_additive",
    "attend_additive_single",
    "attention_param_arrays",
    "clone_model",
    "full_scale_bidirectional",
    "full_scale_unidirectional",
    "lstm_param_arrays",
    "lstm_step",
    "micro_config",
]
