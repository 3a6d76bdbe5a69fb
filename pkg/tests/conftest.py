"""Shared fixtures: a small synthetic dataset and a quick trained model.

The "tiny" fixtures (16px images, reduced dims) are for contract tests;
the acceptance module builds its own desk-scale runs.
"""

import numpy as np
import pytest

from outfitgen.catalog import SyntheticConfig, generate_synthetic_dataset, write_dataset
from outfitgen.model import ItemIndex, ModelConfig
from outfitgen.training import TrainConfig, model_from_checkpoint, train

TINY_SYNTH = dict(
    n_themes=3,
    items_per_theme=10,
    types=("tops", "bottoms"),
    outfit_len=2,
    n_outfits=30,
    noise=0.05,
    seed=5,
    resolution=16,
)

TINY_MODEL = dict(
    feature_dim=16,
    embed_dim=16,
    resolution=16,
    channels=(8, 12, 16),
    text_buckets=256,
    text_hidden=32,
    embed_hidden=16,
    disc_hidden=(32, 16),
)


@pytest.fixture(scope="session")
def tiny_splits():
    return generate_synthetic_dataset(SyntheticConfig(**TINY_SYNTH))


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory, tiny_splits):
    out = tmp_path_factory.mktemp("tiny_dataset")
    write_dataset(tiny_splits, out)
    return out


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_splits):
    config = TrainConfig(learning_rate=3e-3, epochs=3, batch_size=16, seed=0)
    return train(
        tiny_splits["train"],
        config,
        valid_split=tiny_splits["valid"],
        model_config=ModelConfig(**TINY_MODEL),
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_checkpoint):
    return model_from_checkpoint(tiny_checkpoint)


@pytest.fixture(scope="session")
def tiny_test_index(tiny_model, tiny_splits):
    return ItemIndex.build(tiny_model, tiny_splits["test"])


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
