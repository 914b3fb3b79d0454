import numpy as np
import pytest

from kpiscan import GeneratorSpec, generate_corpus
from kpiscan.model import Model, ModelConfig


def small_config(arch: str = "rcnn", **overrides) -> ModelConfig:
    """A model small enough for fast unit tests (input length 32)."""
    kwargs = dict(
        arch=arch,
        input_length=32,
        conv_blocks=((4, 3, 2),),
        lstm_hidden=8,
        dense_hidden=8,
    )
    kwargs.update(overrides)
    return ModelConfig(**kwargs)


@pytest.fixture(scope="session")
def tiny_corpus():
    """48 examples (6 per class), feature length 32."""
    return generate_corpus(6, GeneratorSpec(length=64, seed=3), 32)


@pytest.fixture()
def small_rcnn():
    return Model(small_config("rcnn"), seed=11)


@pytest.fixture()
def small_cnn():
    return Model(small_config("cnn"), seed=11)


@pytest.fixture()
def rand_batch():
    rng = np.random.default_rng(5)
    x = rng.random((4, 1, 32))
    targets = np.eye(8)[rng.integers(0, 8, size=4)]
    return x, targets
