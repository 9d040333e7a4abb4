import functools

import numpy as np
import pytest

from pstsync.core import CameraParams, GeoPoint
from pstsync.simulator import generate, startup_scene

from reference_data import REFERENCE_CAMERA


@pytest.fixture
def ref_camera():
    """The west-facing 4K roadside camera the field measurements come from."""
    r = REFERENCE_CAMERA
    return CameraParams(r["focal_px"], r["pitch_deg"], r["height_m"], r["heading_deg"],
                        GeoPoint(30.2741, 120.1551), 3840, 2160)


@pytest.fixture
def hd_camera():
    return CameraParams(1800.0, 6.5, 7.5, 270.0, GeoPoint(30.2741, 120.1551), 1920, 1080)


@functools.lru_cache(maxsize=None)
def cached_startup_scene(seed=0, **kw):
    return generate(startup_scene(seed, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
