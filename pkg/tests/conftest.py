import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hartogs_witness import CutoffSpec, RngStream, make_domain


@pytest.fixture
def rng():
    return RngStream(42)


@pytest.fixture
def classical_domain():
    """n1 = n2 = alpha = 1 with Euclidean norms, the baseline configuration."""
    return make_domain(1, 1, 1.0, 2.0, 2.0)


@pytest.fixture
def cutoff():
    return CutoffSpec()
