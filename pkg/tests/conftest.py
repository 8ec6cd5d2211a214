from __future__ import annotations

import pytest

from demojudge.core import DemoPool, Demonstration, Thresholds, make_synthetic_pool


@pytest.fixture
def pool():
    return make_synthetic_pool(3, 40)


@pytest.fixture
def tiny_pool():
    """Fully enumerable pool: buckets of sizes (2, 1, 1), 12 ordered contexts."""
    return DemoPool(
        {
            0: (Demonstration("a0", 0), Demonstration("a1", 0)),
            1: (Demonstration("b0", 1),),
            2: (Demonstration("c0", 2),),
        }
    )


@pytest.fixture
def thresholds():
    return Thresholds(alpha=0.75, beta=0.3, gamma=0.1)
