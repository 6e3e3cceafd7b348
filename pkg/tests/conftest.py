import numpy as np
import pytest

from frontierlab.fixtures import bundled_moments, bundled_panel, five_asset_moments


@pytest.fixture(scope="session")
def panel():
    return bundled_panel()


@pytest.fixture(scope="session")
def moments():
    return bundled_moments()


@pytest.fixture(scope="session")
def five_assets():
    return five_asset_moments()


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)
