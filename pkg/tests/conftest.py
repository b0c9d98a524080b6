import numpy as np
import pytest

from handretarget import fixtures as fx


@pytest.fixture(scope="session")
def synth_hand():
    return fx.make_synthetic_hand()


@pytest.fixture(scope="session")
def skeleton(synth_hand):
    return synth_hand[0]


@pytest.fixture(scope="session")
def hand_mesh(synth_hand):
    return synth_hand[1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
