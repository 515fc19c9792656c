import json
from pathlib import Path

import numpy as np
import pytest

_ORACLE = json.loads((Path(__file__).parent / "data" / "oracle_values.json").read_text())


def decode(x):
    arr = np.asarray(x, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def oracle(name):
    """Frozen reference values produced by tests/data/generate_oracle.py."""
    return _ORACLE[name]


def random_matrix(rng, n, scale=1.0):
    return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
