from deskasr.training.adam import Adam, clip_by_global_norm, global_norm
from deskasr.training.losses import (
    ce_loss_smoothed,
    expected_word_errors,
    mwer_loss,
    smoothed_targets,
)
from deskasr.training.loop import (
    TrainConfig,
    TrainState,
    Utterance,
    decode_corpus,
    evaluate_wer,
    expected_nbest_errors,
    forward_scheduled_sampling,
    load_model_checkpoint,
    load_training_checkpoint,
    run_training,
    save_training_checkpoint,
    sync_accumulate,
    train_step,
)
from deskasr.training.schedules import lr_schedule, ss_probability
from deskasr.training.tracker import GradTrackerState, grad_tracker_update

__all__ = [
    "Adam",
    "GradTrackerState",
    "TrainConfig",
    "TrainState",
    "Utterance",
    "ce_loss_smoothed",
    "clip_by_global_norm",
    "decode_corpus",
    "evaluate_wer",
    "expected_nbest_errors",
    "expected_word_errors",
    "forward_scheduled_sampling",
    "global_norm",
    "grad_tracker_update",
    "load_model_checkpoint",
    "load_training_checkpoint",
    "lr_schedule",
    "mwer_loss",
    "run_training",
    "save_training_checkpoint",
    "smoothed_targets",
    "ss_probability",
    "sync_accumulate",
    "train_step",
]
