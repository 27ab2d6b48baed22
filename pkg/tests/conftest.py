import numpy as np
import pytest

from stereolab import CameraIntrinsics, DisparityMap, StereoRig


@pytest.fixture
def rig() -> StereoRig:
    return StereoRig(CameraIntrinsics(fx=480.0, fy=480.0, cx=320.0, cy=240.0),
                     baseline=0.1)


def constant_disparity(value: float, width: int = 16, height: int = 12) -> DisparityMap:
    return DisparityMap(np.full((height, width), value, dtype=np.float32))


def random_disparity(rng: np.random.Generator, width: int = 16, height: int = 12,
                     lo: float = 1.0, hi: float = 64.0,
                     invalid_fraction: float = 0.0) -> DisparityMap:
    values = rng.uniform(lo, hi, size=(height, width)).astype(np.float32)
    if invalid_fraction > 0:
        drop = rng.random((height, width)) < invalid_fraction
        values[drop] = np.nan
    return DisparityMap(values)
