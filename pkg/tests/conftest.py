from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coreident.instances import default_space, random_combos, random_probability

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    return json.loads((FIXTURES / name).read_text())


def instance(seed: int, n: int):
    """A random (combos, p) pair on ``n`` outcomes, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    space = default_space(n)
    combos = random_combos(rng, space)
    return combos, random_probability(rng, space, combos)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
