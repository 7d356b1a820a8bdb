"""Tests for the Adam trainer, resumable state, and checkpoint files."""

import numpy as np
import numpy.testing as npt
import pytest

from interacte.checkpoint import (
    MAGIC,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from interacte.kgdata import KnowledgeGraph, Vocab, generate_synthetic_kg
from interacte.model import ModelConfig, init_params
from interacte.train import (
    AdamState,
    NumericError,
    TrainConfig,
    adam_step,
    build_training_groups,
    load_train_state,
    save_train_state,
    train_loop,
)

pytestmark = pytest.mark.filterwarnings("ignore::interacte.model.ConfigWarning")


def tiny_model_config(**overrides):
    base = dict(d_w=2, d_h=4, t=1, k=3, n_filters=2, reshaping="chequer",
                conv_mode="circular", input_dropout=0.0, feature_dropout=0.0,
                hidden_dropout=0.0, label_smoothing=0.1, dtype="float64")
    base.update(overrides)
    return ModelConfig(**base)


def tiny_kg():
    return generate_synthetic_kg(n_entities=16, seed=0, compositions=False)


# ---------------------------------------------------------------------------
# optimiser


def test_adam_first_step_is_signed_lr():
    cfg = tiny_model_config()
    params = init_params(cfg, n_entities=5, n_relations=2, seed=0)
    before = {k: v.copy() for k, v in params.learnable().items()}
    rng = np.random.default_rng(1)
    grads = {k: np.sign(rng.standard_normal(v.shape)) * 2.0
             for k, v in before.items()}
    state = AdamState(params)
    adam_step(params, grads, state, TrainConfig(lr=0.05))
    assert state.step == 1
    for name, arr in params.learnable().items():
        # first bias-corrected step reduces to -lr * g / (|g| + eps)
        npt.assert_allclose(arr, before[name] - 0.05 * np.sign(grads[name]),
                            atol=1e-8)


def test_adam_rejects_non_finite_gradient():
    cfg = tiny_model_config()
    params = init_params(cfg, n_entities=4, n_relations=1, seed=0)
    grads = {k: np.zeros_like(v) for k, v in params.learnable().items()}
    grads["filters"][0, 0, 0] = np.nan
    with pytest.raises(NumericError, match="filters"):
        adam_step(params, grads, AdamState(params), TrainConfig())


def test_adam_l2_decays_weights_even_with_zero_gradient():
    cfg = tiny_model_config()
    params = init_params(cfg, n_entities=4, n_relations=1, seed=0)
    zero = {k: np.zeros_like(v) for k, v in params.learnable().items()}

    frozen = init_params(cfg, n_entities=4, n_relations=1, seed=0)
    adam_step(frozen, {k: v.copy() for k, v in zero.items()}, AdamState(frozen),
              TrainConfig(lr=0.01, l2=0.0))
    npt.assert_array_equal(frozen.entity,
                           init_params(cfg, 4, 1, seed=0).entity)

    norm_before = np.abs(params.entity).sum()
    adam_step(params, zero, AdamState(params), TrainConfig(lr=0.01, l2=1e-5))
    assert np.abs(params.entity).sum() < norm_before


# ---------------------------------------------------------------------------
# 1-N training groups


def hand_kg():
    entities = Vocab()
    for name in "abcd":
        entities.add(name)
    relations = Vocab()
    relations.add("r0")
    relations.add("r1")
    train = np.array([[0, 0, 1], [0, 0, 2], [3, 0, 1]], dtype=np.int64)
    empty = np.empty((0, 3), dtype=np.int64)
    return KnowledgeGraph(entities, relations, train, empty, empty)


def test_build_training_groups_with_inverses():
    pairs, targets = build_training_groups(hand_kg(), inverse_relations=True)
    table = {tuple(p): list(t) for p, t in zip(pairs, targets)}
    assert table == {
        (0, 0): [1, 2],       # forward queries group shared subjects
        (3, 0): [1],
        (1, 2): [0, 3],       # inverse rows live at relation id + n_relations
        (2, 2): [0],
    }


def test_build_training_groups_without_inverses():
    pairs, targets = build_training_groups(hand_kg(), inverse_relations=False)
    assert len(pairs) == 2
    assert {tuple(p) for p in pairs} == {(0, 0), (3, 0)}


# ---------------------------------------------------------------------------
# training loop


def test_train_loop_reduces_loss_and_tracks_best():
    result = train_loop(tiny_kg(), tiny_model_config(),
                        TrainConfig(lr=0.005, batch_size=16, max_epochs=30,
                                    eval_every=30, patience=10, seed=0))
    train_losses = [r["loss"] for r in result.history if r["split"] == "train"]
    assert len(train_losses) == 30
    assert train_losses[-1] < train_losses[0]
    assert result.epochs_run == 30
    assert result.best_valid is not None
    assert 0.0 < result.best_valid.mrr <= 1.0
    valid_records = [r for r in result.history if r["split"] == "valid"]
    assert valid_records[0]["epoch"] == 30
    assert {"mrr", "mr", "hits1", "hits10", "n"} <= set(valid_records[0])


def test_train_loop_is_bit_exact_across_runs():
    kg = tiny_kg()
    cfg = tiny_model_config(dtype="float32", input_dropout=0.2)
    tcfg = TrainConfig(lr=0.005, batch_size=16, max_epochs=5, eval_every=5,
                       patience=10, seed=3)
    a = train_loop(kg, cfg, tcfg)
    b = train_loop(kg, cfg, tcfg)
    for name, arr in a.best_params.learnable().items():
        npt.assert_array_equal(arr, b.best_params.learnable()[name])
    assert a.history == b.history


def test_max_epochs_zero_only_evaluates():
    result = train_loop(tiny_kg(), tiny_model_config(), TrainConfig(max_epochs=0))
    assert result.epochs_run == 0
    assert result.best_epoch == 0
    assert len(result.history) == 1
    assert result.history[0]["epoch"] == 0
    assert result.history[0]["split"] == "valid"


def test_early_stopping_on_flat_metric():
    # lr=0 freezes the params, so the second evaluation cannot improve on
    # the first and patience=1 stops the run at epoch 2 of 10
    result = train_loop(tiny_kg(), tiny_model_config(),
                        TrainConfig(lr=0.0, batch_size=16, max_epochs=10,
                                    eval_every=1, patience=1, seed=0))
    assert result.epochs_run == 2
    assert result.best_epoch == 1


def test_log_callback_sees_every_record():
    seen = []
    result = train_loop(tiny_kg(), tiny_model_config(),
                        TrainConfig(lr=0.005, batch_size=16, max_epochs=3,
                                    eval_every=2, seed=0), log=seen.append)
    assert seen == result.history


def test_train_config_dict_roundtrip_and_validation():
    cfg = TrainConfig(lr=0.0001, batch_size=64, l2=1e-5)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown train config fields"):
        TrainConfig.from_dict({"lr": 0.001, "momentum": 0.9})
    with pytest.raises(ValueError):
        TrainConfig(lr=-1.0).validate()
    with pytest.raises(ValueError):
        TrainConfig(patience=0).validate()


# ---------------------------------------------------------------------------
# resume


def test_resume_matches_uninterrupted_run(tmp_path):
    kg = tiny_kg()
    cfg = tiny_model_config(dtype="float32", input_dropout=0.2)

    straight = train_loop(kg, cfg, TrainConfig(lr=0.005, batch_size=16,
                                               max_epochs=6, eval_every=3,
                                               patience=10, seed=1))

    first = train_loop(kg, cfg, TrainConfig(lr=0.005, batch_size=16,
                                            max_epochs=3, eval_every=3,
                                            patience=10, seed=1))
    path = tmp_path / "state.ckpt"
    save_train_state(path, cfg, (kg.n_entities, kg.n_relations), first.state)
    loaded_cfg, sizes, state = load_train_state(path)
    assert loaded_cfg == cfg
    assert sizes == (kg.n_entities, kg.n_relations)

    resumed = train_loop(kg, cfg, TrainConfig(lr=0.005, batch_size=16,
                                              max_epochs=6, eval_every=3,
                                              patience=10, seed=1), resume=state)
    assert resumed.epochs_run == 6
    for name, arr in straight.state.params.learnable().items():
        npt.assert_array_equal(arr, resumed.state.params.learnable()[name])
    # the first leg emitted 3 train records plus the epoch-3 eval
    assert straight.history[4:] == resumed.history


def test_load_train_state_rejects_plain_checkpoint(tmp_path):
    cfg = tiny_model_config()
    params = init_params(cfg, 4, 1, seed=0)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, cfg, 4, 1, params)
    with pytest.raises(ValueError, match="training state"):
        load_train_state(path)


# ---------------------------------------------------------------------------
# checkpoint container


def test_checkpoint_roundtrip(tmp_path):
    cfg = tiny_model_config(entity_bias=True)
    params = init_params(cfg, n_entities=6, n_relations=2, seed=5)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, cfg, 6, 2, params, extras={"note": np.arange(3.0)},
                    meta={"epoch": 12})
    ckpt = load_checkpoint(path)
    assert ckpt.config == cfg
    assert (ckpt.n_entities, ckpt.n_relations) == (6, 2)
    assert ckpt.meta == {"epoch": 12}
    restored = ckpt.params()
    for name, arr in params.learnable().items():
        npt.assert_array_equal(arr, restored.learnable()[name])
    npt.assert_array_equal(ckpt.tensors["perms"], params.perms)
    npt.assert_array_equal(ckpt.tensors["note"], np.arange(3.0))


def test_checkpoint_bytes_are_reproducible(tmp_path):
    cfg = tiny_model_config()
    params = init_params(cfg, 5, 2, seed=0)
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, cfg, 5, 2, params)
    save_checkpoint(b, cfg, 5, 2, params)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes()[:8] == MAGIC


def test_checkpoint_rejects_bad_magic(tmp_path):
    cfg = tiny_model_config()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, cfg, 4, 1, init_params(cfg, 4, 1, seed=0))
    raw = path.read_bytes()
    path.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_rejects_unknown_version(tmp_path):
    cfg = tiny_model_config()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, cfg, 4, 1, init_params(cfg, 4, 1, seed=0))
    raw = path.read_bytes()
    patched = raw.replace(b'"version": 1', b'"version": 9', 1)
    assert patched != raw
    path.write_bytes(patched)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_checkpoint_rejects_truncation(tmp_path):
    cfg = tiny_model_config()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, cfg, 4, 1, init_params(cfg, 4, 1, seed=0))
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_rejects_shape_mismatch(tmp_path):
    cfg = tiny_model_config()
    params = init_params(cfg, n_entities=4, n_relations=1, seed=0)
    path = tmp_path / "model.ckpt"
    # header claims 5 entities but the tensors were built for 4
    save_checkpoint(path, cfg, 5, 1, params)
    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(path)


def test_checkpoint_extras_cannot_shadow_params(tmp_path):
    cfg = tiny_model_config()
    params = init_params(cfg, 4, 1, seed=0)
    with pytest.raises(CheckpointError, match="collides"):
        save_checkpoint(tmp_path / "x.ckpt", cfg, 4, 1, params,
                        extras={"entity": np.zeros(2)})
