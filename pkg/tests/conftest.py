import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=25, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def textured_image():
    """One deterministic textured gray image shared across tests."""
    from cmfd.forge import synthetic_background

    return synthetic_background((192, 192), seed=7)
