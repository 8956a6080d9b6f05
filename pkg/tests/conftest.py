import numpy as np
import pytest

from operator_moduli.utils import quiet_progress, rng


@pytest.fixture(autouse=True)
def _no_progress_bars():
    quiet_progress.set()
    yield
    quiet_progress.clear()


@pytest.fixture
def generator() -> np.random.Generator:
    return rng(7)
