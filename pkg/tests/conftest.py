import sys
from dataclasses import replace
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spincim import CurrentLevelModel, SenseConfig

MASTER_SEED = 20240


@pytest.fixture
def model():
    return CurrentLevelModel()


@pytest.fixture
def zero_noise_model():
    return replace(CurrentLevelModel(), sigma=0.0)


@pytest.fixture
def sense():
    return SenseConfig()
