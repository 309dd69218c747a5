import numpy as np
import pytest

from fermicluster.model import hubbard_dimer


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def dimer():
    return hubbard_dimer(t=1.0, U=0.3, mu=0.5, beta=1.0)
