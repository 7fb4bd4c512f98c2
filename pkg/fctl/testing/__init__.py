"""Testing utilities for fctl.

Usage in conftest.py:
    from fctl.testing import MapFactory, ImageFactory, tiny_train_config

    @pytest.fixture
    def maps():
        return MapFactory(seed=0)
"""

from fctl.testing.factories import ImageFactory, MapFactory, tiny_train_config

__all__ = ["ImageFactory", "MapFactory", "tiny_train_config"]
