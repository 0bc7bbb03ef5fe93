import numpy as np
import pytest

from germlab.reconstruct import build_mollifier, widened_bump
from germlab.testfn import standard_bump


@pytest.fixture(scope="session")
def mollifiers():
    """Mollifier families keyed by (base, r); built once per session."""
    cache = {}

    def get(r, base="bump"):
        key = (base, r)
        if key not in cache:
            phi = standard_bump() if base == "bump" else widened_bump()
            cache[key] = build_mollifier(phi, r)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
