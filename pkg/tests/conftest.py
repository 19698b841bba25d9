import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import MockLlm

from emllm.model import ArchConfig, build_network


@pytest.fixture
def mock_llm():
    srv = MockLlm().start()
    yield srv
    srv.stop()


@pytest.fixture(scope="session")
def tiny_arch():
    """Two low-rate channels, small filters: fast enough for unit tests."""
    return ArchConfig.from_rates({"bvp": 8.0, "eda": 4.0}, filters=(3, 4, 5), hidden_units=8)


@pytest.fixture(scope="session")
def tiny_params(tiny_arch):
    """Randomly initialized tiny model over an 8 s window."""
    return build_network(tiny_arch, 8.0, seed=7)
