import numpy as np
import pytest

from voxmine import accel, synthetic, text_lid


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # trigger JIT compilation once so timed tests measure the algorithm
    accel.warmup()


@pytest.fixture(scope="session")
def langs5():
    return synthetic.make_languages(5, seed=11)


@pytest.fixture(scope="session")
def lid5(langs5):
    return text_lid.train_lid(synthetic.isomorphic_corpora(langs5, 20000, seed=12))


@pytest.fixture(scope="session")
def langs3():
    return synthetic.make_languages(3, seed=21)


@pytest.fixture(scope="session")
def lid3(langs3):
    return text_lid.train_lid(synthetic.isomorphic_corpora(langs3, 12000, seed=22))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
