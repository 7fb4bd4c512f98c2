"""Pytest configuration and fixtures for fctl tests."""

import numpy as np
import pytest

from fctl.core.tensor import FeatureMap
from fctl.loss.eansdl import EansdlParams
from fctl.net.toynet import init_params
from fctl.testing import ImageFactory, MapFactory, tiny_train_config


@pytest.fixture
def maps():
    """Seeded random feature-map factory."""
    return MapFactory(seed=1234)


@pytest.fixture
def images():
    """Seeded random image factory."""
    return ImageFactory(seed=99)


@pytest.fixture
def default_params():
    """EANSDL hyperparameters with their default values."""
    return EansdlParams()


@pytest.fixture
def tiny_config():
    """Two-epoch config over twelve scenes."""
    return tiny_train_config()


@pytest.fixture
def small_net():
    """Seeded toy net for 16x16 inputs."""
    return init_params(seed=5, image_size=16)


@pytest.fixture
def ramp_x():
    """5x5 slice with f(x, y) = x."""
    x = np.arange(5, dtype=np.float64)[:, None] * np.ones((1, 5))
    return FeatureMap(x[None, None])
