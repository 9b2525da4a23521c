import numpy as np
import pytest

from ddecc_lab.codes import LinearCode, hamming_7_4


@pytest.fixture(scope="session")
def hamming():
    return hamming_7_4()


@pytest.fixture(scope="session")
def repetition3():
    return LinearCode.from_parity_check([[1, 1, 0], [0, 1, 1]], name="rep3")


def random_full_rank_H(m, n, seed, density=0.35):
    rng = np.random.default_rng(seed)
    from ddecc_lab.codes import gf2_rank

    while True:
        H = (rng.random((m, n)) < density).astype(np.uint8)
        if H.sum(axis=0).min() > 0 and gf2_rank(H) == m:
            return H


@pytest.fixture(scope="session")
def code16_8():
    return LinearCode.from_parity_check(random_full_rank_H(8, 16, seed=3), name="rand(16,8)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
