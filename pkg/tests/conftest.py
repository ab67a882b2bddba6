import numpy as np
import pytest

from inst3d.scene import CameraFrame
from inst3d.synth import synth_scene


def pinhole(fid=0, size=100, f=100.0, pose=None, depth=None):
    """Square camera with the principal point at the image centre."""
    depth = np.zeros((size, size)) if depth is None else depth
    return CameraFrame(fid, f, f, size / 2, size / 2, np.eye(4) if pose is None else pose,
                       np.zeros((size, size, 3)), depth)


@pytest.fixture(scope="session")
def small_scene():
    return synth_scene(0, 4, 6, points_per_instance=80)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
