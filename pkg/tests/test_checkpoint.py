"""Checkpoint binary + manifest round trips."""

import numpy as np
import pytest

from deskasr.checkpoint import load_tensors, manifest_path, save_tensors
from deskasr.errors import DataError
from deskasr.model import Seq2SeqModel, micro_config
from deskasr.training import (
    TrainConfig,
    TrainState,
    load_training_checkpoint,
    save_training_checkpoint,
)


class TestTensorStore:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {
            "w1": rng.normal(size=(3, 4)),
            "b": rng.normal(size=(1, 4)),
            "scalarish": np.asarray([1e-300]),
        }
        path = tmp_path / "params.bin"
        save_tensors(path, tensors, extra={"note": 1})
        back, extra = load_tensors(path)
        assert extra == {"note": 1}
        assert sorted(back) == sorted(tensors)
        for k in tensors:
            assert np.array_equal(back[k], tensors[k])
            assert back[k].dtype == np.float64

    def test_same_content_same_bytes(self, tmp_path):
        tensors = {"a": np.arange(6, dtype=float).reshape(2, 3)}
        p1, p2 = tmp_path / "one.bin", tmp_path / "two.bin"
        save_tensors(p1, tensors, extra={"x": [1, 2]})
        save_tensors(p2, {k: v.copy() for k, v in tensors.items()}, extra={"x": [1, 2]})
        assert p1.read_bytes() == p2.read_bytes()
        assert manifest_path(p1).read_text() == manifest_path(p2).read_text()

    def test_missing_files_raise(self, tmp_path):
        with pytest.raises(DataError):
            load_tensors(tmp_path / "absent.bin")

    def test_truncated_binary_rejected(self, tmp_path):
        path = tmp_path / "params.bin"
        save_tensors(path, {"w": np.ones((4, 4))})
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataError):
            load_tensors(path)


class TestTrainingCheckpoint:
    def test_full_state_round_trip(self, tmp_path):
        cfg = micro_config()
        model = Seq2SeqModel.init(cfg, seed=4)
        tcfg = TrainConfig(ce_steps=3, batch_size=2, seed=4)
        state = TrainState.fresh(model, tcfg)
        state.step = 3
        state.tracker.ema_norm = 0.25
        # touch optimizer state so moments exist
        grads = {k: np.zeros_like(v) for k, v in model.params.items()}
        state.optimizer.step(model.params, grads, lr=0.0)

        path = tmp_path / "ckpt.bin"
        save_training_checkpoint(path, model, tcfg, state)
        model2, cfg2, state2 = load_training_checkpoint(path)

        assert cfg2.to_dict() == tcfg.to_dict()
        assert model2.cfg.to_dict() == cfg.to_dict()
        assert state2.step == 3
        assert state2.tracker.ema_norm == 0.25
        assert state2.optimizer.t == state.optimizer.t
        for k in model.params:
            assert np.array_equal(model2.params[k], model.params[k])
            assert np.array_equal(state2.optimizer.m[k], state.optimizer.m[k])
        # rng streams continue identically
        assert state2.sample_rng.random() == state.sample_rng.random()
        assert state2.data_rng.random() == state.data_rng.random()
