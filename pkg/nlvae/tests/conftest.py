"""
Shared fixtures: tiny model and training configurations that keep numpy training fast.
"""

import numpy as np
import pytest

from nlvae.engine.tensor import precision
from nlvae.models.config import ModelConfig, TrainConfig


def tiny_model_config(**overrides) -> ModelConfig:
    values = dict(
        encoder_blocks=2,
        decoder_blocks=2,
        base_width=2,
        latent_dim=8,
        canvas=16,
        upsample_stages=2,
    )
    values.update(overrides)
    return ModelConfig(**values)


def tiny_train_config(**overrides) -> TrainConfig:
    model = overrides.pop("model", None) or tiny_model_config()
    values = dict(
        scale=2,
        beta=1.0,
        epochs=3,
        minibatch=2,
        crop=16,
        learning_rate=1e-2,
        seed=7,
        log_every=1,
        model=model,
    )
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def f64():
    """Run the test body in 64-bit precision."""
    with precision("f64"):
        yield


@pytest.fixture
def model_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def train_config() -> TrainConfig:
    return tiny_train_config()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
