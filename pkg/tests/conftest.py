from __future__ import annotations

import numpy as np
import pytest

from src.families import make_family
from src.rng import stream
from src.sequence_model import Basis, CoefficientVector


@pytest.fixture
def rng() -> np.random.Generator:
    return stream(12345, "tests")


@pytest.fixture
def trig_theta() -> CoefficientVector:
    return CoefficientVector.from_mapping(Basis.TRIG_COMPLEX, {1: 0.2 + 0.1j, 3: -0.05j, 7: 0.03})


@pytest.fixture
def cosine_theta() -> CoefficientVector:
    return CoefficientVector.from_mapping(Basis.COSINE_HALF, {1: 0.3, 2: -0.1, 5: 0.05})


@pytest.fixture
def all_low_trig():
    return make_family("all-low", 0.25, basis="trig")


@pytest.fixture
def escaping_trig():
    return make_family("escaping", 0.25, basis="trig")
