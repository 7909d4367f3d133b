import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from weylscale.testfn import Grid  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    return Grid()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240611))
