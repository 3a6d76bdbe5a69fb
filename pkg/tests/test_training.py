"""Training loop determinism, checkpoints, and the gradient-check suite."""

import json

import numpy as np
import pytest

from outfitgen.catalog import generate_positive_pairs, sample_negative_pairs
from outfitgen.errors import (
    CheckpointIntegrityError,
    ConfigError,
    NumericError,
    ShapeError,
)
from outfitgen.model import ItemIndex, ModelConfig, OutfitModel
from outfitgen.training import (
    Checkpoint,
    TrainConfig,
    checkpoint_from_model,
    gradcheck_suite,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    train,
)
from conftest import TINY_MODEL


class TestTrainConfig:
    def test_zero_epochs_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)

    def test_nonpositive_rates_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)

    def test_defaults_match_documented_schedule(self):
        config = TrainConfig()
        assert config.learning_rate == 1e-5
        assert config.beta1 == 0.9
        assert config.beta2 == 0.999
        assert config.epochs == 20
        assert config.batch_size == 64


class TestTrainLoop:
    def test_same_seed_same_checkpoint(self, tiny_splits):
        def run():
            config = TrainConfig(learning_rate=3e-3, epochs=2, batch_size=16, seed=11)
            return train(tiny_splits["train"], config, valid_split=tiny_splits["valid"],
                         model_config=ModelConfig(**TINY_MODEL))

        a, b = run(), run()
        assert sorted(a.arrays) == sorted(b.arrays)
        for name in a.arrays:
            np.testing.assert_array_equal(a.arrays[name], b.arrays[name])
        assert a.manifest["metrics"]["history"] == b.manifest["metrics"]["history"]

    def test_epoch_negatives_differ_but_reproduce(self, tiny_splits):
        split = tiny_splits["train"]
        positives = generate_positive_pairs(split.outfits)
        seed = 3
        epoch0 = sample_negative_pairs(positives, split.items, seed=seed ^ 0)
        epoch1 = sample_negative_pairs(positives, split.items, seed=seed ^ 1)
        assert epoch0 != epoch1
        assert epoch0 == sample_negative_pairs(positives, split.items, seed=seed ^ 0)

    def test_nonfinite_loss_aborts_with_diagnostics(self, tiny_splits):
        import copy

        broken = copy.deepcopy(tiny_splits["train"])
        first = next(iter(broken.items.values()))
        first.image[0, 0, 0] = np.nan
        config = TrainConfig(learning_rate=1e-3, epochs=1, batch_size=8, seed=0)
        with pytest.raises(NumericError, match=r"epoch 0, batch \d+"):
            train(broken, config, model_config=ModelConfig(**TINY_MODEL))

    def test_metric_log_written(self, tiny_splits, tmp_path):
        log_path = tmp_path / "log.jsonl"
        config = TrainConfig(learning_rate=3e-3, epochs=2, batch_size=16, seed=0)
        train(tiny_splits["train"], config, valid_split=tiny_splits["valid"],
              model_config=ModelConfig(**TINY_MODEL), log_path=log_path)
        records = [json.loads(line) for line in log_path.read_text().splitlines()]
        assert len(records) == 2
        for epoch, record in enumerate(records):
            assert record["epoch"] == epoch
            assert {"loss_total", "loss_embed", "loss_image", "loss_text",
                    "loss_cat", "val_auc", "improved"} <= set(record)

    def test_threshold_fitted_for_all_modes(self, tiny_checkpoint):
        thresholds = tiny_checkpoint.manifest["thresholds"]
        assert set(thresholds) == {"image", "text", "cat"}
        for theta in thresholds.values():
            assert 0.0 < theta < 1.0


class TestCheckpointContainer:
    def test_round_trip_probe_batch_bitwise(self, tiny_checkpoint, tiny_splits, tmp_path):
        model = model_from_checkpoint(tiny_checkpoint)
        probe = list(tiny_splits["test"].items.values())[:6]
        vi0, vt0 = model.features_for_items(probe)

        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_checkpoint, path)
        restored = model_from_checkpoint(load_checkpoint(path))
        vi1, vt1 = restored.features_for_items(probe)
        np.testing.assert_array_equal(vi0, vi1)
        np.testing.assert_array_equal(vt0, vt1)
        assert restored.thresholds == model.thresholds

    def test_corrupted_payload_detected(self, tiny_checkpoint, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_checkpoint, path)
        data = bytearray(path.read_bytes())
        data[-3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointIntegrityError):
            load_checkpoint(path)

    def test_truncated_file_detected(self, tiny_checkpoint, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_checkpoint, path)
        path.write_bytes(path.read_bytes()[:40])
        with pytest.raises(CheckpointIntegrityError):
            load_checkpoint(path)

    def test_manifest_dimension_mismatch_is_shape_error(self, tiny_checkpoint, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_checkpoint, path)
        checkpoint = load_checkpoint(path)
        checkpoint.manifest["config"]["embed_dim"] = 99
        with pytest.raises(ShapeError):
            model_from_checkpoint(checkpoint)

    def test_missing_array_detected(self, tiny_checkpoint):
        arrays = dict(tiny_checkpoint.arrays)
        arrays.pop(sorted(arrays)[0])
        broken = Checkpoint(manifest=tiny_checkpoint.manifest, arrays=arrays)
        with pytest.raises(CheckpointIntegrityError):
            model_from_checkpoint(broken)


class TestGradcheckSuite:
    def test_all_gradients_within_tolerance(self):
        report = gradcheck_suite(seed=0)
        assert report["max_relative_error"] < 1e-4
        for section, values in report["sections"].items():
            worst = max(values.values())
            assert worst < 1e-4, f"{section} worst {worst}"

    def test_parameter_census_matches_hand_count(self):
        report = gradcheck_suite(seed=0)
        # suite model: d_f=6, d_e=5, res 8, channels (4,5,6), buckets 32,
        # text hidden 7, embed hidden 6, disc hidden (8,5)
        image = (4 * 3 * 9 + 4) + (5 * 4 * 9 + 5) + (6 * 5 * 9 + 6) + (6 * 6 + 6)
        text = (32 * 7 + 7) + (7 * 6 + 6)
        embedders = 2 * ((6 * 6 + 6) + (6 * 5 + 5))
        disc_single = (18 * 8 + 8) + (8 * 5 + 5) + (5 * 1 + 1)
        disc_cat = (36 * 8 + 8) + (8 * 5 + 5) + (5 * 1 + 1)
        expected_total = image + text + embedders + 2 * disc_single + disc_cat

        config = ModelConfig(feature_dim=6, embed_dim=5, resolution=8, channels=(4, 5, 6),
                             text_buckets=32, text_hidden=7, embed_hidden=6,
                             disc_hidden=(8, 5))
        model = OutfitModel(config, ["tops", "bottoms"], seed=0)
        assert model.param_count() == expected_total
        assert len(report["params"]) == len(model.params()) == 38
        assert len(set(report["params"])) == 38  # names unique

    def test_suite_is_deterministic(self):
        a = gradcheck_suite(seed=1)
        b = gradcheck_suite(seed=1)
        assert a["max_relative_error"] == b["max_relative_error"]


class TestModelBundle:
    def test_item_index_vectors_match_manual_path(self, tiny_model, tiny_splits):
        index = ItemIndex.build(tiny_model, tiny_splits["test"])
        item_id = index.ids[3]
        item = tiny_splits["test"].items[item_id]
        vi, vt = tiny_model.features_for_items([item])
        ui, ut = tiny_model.embeddings_from_features(vi, vt)
        np.testing.assert_allclose(index.vectors[3],
                                   tiny_model.item_vectors(ui, ut)[0], rtol=1e-10)

    def test_mean_item_representation(self, tiny_splits):
        config = ModelConfig(**{**TINY_MODEL, "item_repr": "mean"})
        model = OutfitModel(config, tiny_splits["train"].type_vocabulary, seed=0)
        items = list(tiny_splits["train"].items.values())[:4]
        vi, vt = model.features_for_items(items)
        ui, ut = model.embeddings_from_features(vi, vt)
        np.testing.assert_allclose(model.item_vectors(ui, ut), 0.5 * (ui + ut))

    def test_checkpoint_metrics_snapshot(self, tiny_checkpoint):
        metrics = tiny_checkpoint.manifest["metrics"]
        assert metrics["best_val_auc"] is not None
        assert 0.0 <= metrics["best_val_auc"] <= 1.0
        assert metrics["best_epoch"] is not None
        assert checkpoint_from_model is not None

    def test_missing_modality_rejected(self, tiny_model):
        from outfitgen.errors import ModalityError

        vi = np.zeros((2, tiny_model.config.feature_dim))
        with pytest.raises(ModalityError):
            tiny_model.mode_features(vi, None, "text")
        with pytest.raises(ModalityError):
            tiny_model.mode_features(None, vi, "cat")
        np.testing.assert_array_equal(tiny_model.mode_features(vi, None, "image"), vi)

    def test_transform_ablation_trains(self, tiny_splits):
        # discriminators over a reduced transform set train end to end
        config = TrainConfig(learning_rate=3e-3, epochs=1, batch_size=16, seed=0)
        model_config = ModelConfig(**{**TINY_MODEL, "transforms": ("dot", "sum")})
        checkpoint = train(tiny_splits["train"], config,
                           valid_split=tiny_splits["valid"], model_config=model_config)
        assert checkpoint.manifest["config"]["transforms"] == ["dot", "sum"]
        restored = model_from_checkpoint(checkpoint)
        assert restored.discriminators["cat"].net.layers[0].in_dim == 2 * 2 * 16
