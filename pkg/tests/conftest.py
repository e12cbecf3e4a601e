import random
from fractions import Fraction as F

import pytest

from redundancy_ht import SystemModel


@pytest.fixture
def mm1():
    """Single server, single type: the M/M/1 special case at rho = 1/2."""
    return SystemModel(mu=(F(1),), lam=F(1, 2), job_types=(frozenset({1}),), p=(F(1),))


@pytest.fixture
def n_model():
    """Two unit-speed servers, types {1,2} and {2}, p = (1/2, 1/2), lam = 0.8 (scenario III)."""
    return SystemModel(mu=(F(1), F(1)), lam=F(8, 10),
                       job_types=(frozenset({1, 2}), frozenset({2})), p=(F(1, 2), F(1, 2)))


@pytest.fixture
def four_server():
    """Four unit-speed servers, types {1},{1,2,3},{3},{3,4}, p=(1/4,1/4,1/6,1/3), lam = 1/2."""
    return SystemModel(
        mu=(F(1), F(1), F(1), F(1)), lam=F(1, 2),
        job_types=(frozenset({1}), frozenset({1, 2, 3}), frozenset({3}), frozenset({3, 4})),
        p=(F(1, 4), F(1, 4), F(1, 6), F(1, 3)))


@pytest.fixture
def diamond():
    """Three unit-speed servers, types {1,3},{2,3},{3} with uniform p: two
    incomparable components share a descendant, so the subtree family is
    not laminar."""
    return SystemModel(mu=(F(1), F(1), F(1)), lam=F(1, 2),
                       job_types=(frozenset({1, 3}), frozenset({2, 3}), frozenset({3})),
                       p=(F(1, 3), F(1, 3), F(1, 3)))


@pytest.fixture
def rng():
    return random.Random(12345)
