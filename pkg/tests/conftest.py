import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _configs import TINY_CONFIG  # noqa: E402

from styleq import StyleControlledModel, make_dataset  # noqa: E402


@pytest.fixture(scope="session")
def tiny_model():
    torch.manual_seed(0)
    return StyleControlledModel(TINY_CONFIG)


@pytest.fixture(scope="session")
def small_dataset():
    return make_dataset(12, min_len=3, max_len=4, seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
