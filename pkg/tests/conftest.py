import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from brpi.game import BlottoParams, build_game  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def blotto2():
    return build_game(BlottoParams(2, 10, 3))


@pytest.fixture(scope="session")
def blotto3():
    return build_game(BlottoParams(3, 10, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dense_game(rng, n=None, max_actions=8, max_players=3):
    n = n or int(rng.integers(2, max_players + 1))
    counts = tuple(int(k) for k in rng.integers(1, max_actions + 1, size=n))
    tensor = rng.normal(size=(n,) + counts)
    return build_game(tensor), tensor


def random_profile(rng, counts, sparse=False):
    probs = []
    for k in counts:
        p = rng.dirichlet(np.ones(k))
        if sparse and k > 1:
            p[rng.random(k) < 0.3] = 0.0
            if p.sum() == 0:
                p[rng.integers(k)] = 1.0
            p /= p.sum()
        probs.append(p)
    return probs


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
