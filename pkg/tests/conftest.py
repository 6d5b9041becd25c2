import numpy as np
import pytest

from gbpf import CovarianceFunction, GbpModel


@pytest.fixture(scope="session")
def dyadic_cov():
    # C(k) = 0.1 * 2^-k: ratio constant 1/2, C(1) = 0.05.
    return CovarianceFunction.tabulated({1: 0.05, 2: 0.025, 3: 0.0125}, tail="geometric")


@pytest.fixture(scope="session")
def dyadic_model(dyadic_cov):
    return GbpModel.create(0.5, dyadic_cov)


@pytest.fixture(scope="session")
def lrd_model():
    # Long-memory latent model shared by the heavy reproduction tests.
    return GbpModel.create(0.3, CovarianceFunction.power_law(0.12, 0.7))


@pytest.fixture(scope="session")
def lrd_tables(lrd_model):
    return lrd_model.gap_tables(200_000)


def rng_for(tag: str) -> np.random.Generator:
    import hashlib

    seed = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:4], "big")
    return np.random.default_rng(np.random.SeedSequence(seed))
