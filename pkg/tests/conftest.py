import os
from pathlib import Path

import numpy as np
import pytest

from qsvtemu.phases import generate

DATA_DIR = Path(os.environ.get("QSVTEMU_DATA", Path(__file__).parent / "data"))

_PHASES = {}


def phase_set(kappa_s, epsilon):
    """Session cache; generation at kappa_s=50 takes seconds."""
    key = (float(kappa_s), float(epsilon))
    if key not in _PHASES:
        _PHASES[key] = generate(kappa_s, epsilon)
    return _PHASES[key]


def cavity_path(name):
    return DATA_DIR / f"{name}.mtx"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
