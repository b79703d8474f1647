import numpy as np
import pytest

from seqbeam.provider import CoupledProvider, PssmProvider
from seqbeam.seqcore import ALPHABET


def random_sequence(rng, length: int) -> str:
    return "".join(rng.choice(list(ALPHABET), length))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def pssm6():
    return PssmProvider.random(6, rng_seed=11)


@pytest.fixture
def coupled3():
    return CoupledProvider.random(3, rng_seed=7, coupling_scale=0.5)


@pytest.fixture
def coupled20():
    return CoupledProvider.random(20, rng_seed=3, coupling_scale=0.3)
