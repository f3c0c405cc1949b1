import numpy as np
import pytest

from hazevo.scenes import PlaneSpec, SceneSpec, TextureSpec
from hazevo.se3 import PoseSE3, se3_exp
from hazevo.types import CameraIntrinsics


def random_pose(rng, max_angle=np.pi * 0.8, max_trans=5.0) -> PoseSE3:
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0, max_angle)
    t = rng.uniform(-max_trans, max_trans, 3)
    return se3_exp(np.concatenate([axis * angle, t]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def single_plane_scene(width=64, height=64, depth=10.0, twist=None,
                       seed=1, **scene_kwargs) -> SceneSpec:
    k = CameraIntrinsics(1.2 * width, 1.2 * width,
                         (width - 1) / 2.0, (height - 1) / 2.0)
    pose = se3_exp(np.zeros(6) if twist is None else np.asarray(twist))
    return SceneSpec(width, height, k,
                     (PlaneSpec(depth=depth, texture=TextureSpec(seed=seed)),),
                     pose, **scene_kwargs)


def two_plane_scene(width=64, height=64, near=5.0, far=20.0, twist=None,
                    seed=1, **scene_kwargs) -> SceneSpec:
    k = CameraIntrinsics(1.2 * width, 1.2 * width,
                         (width - 1) / 2.0, (height - 1) / 2.0)
    pose = se3_exp(np.zeros(6) if twist is None else np.asarray(twist))
    region = (width // 4, height // 4, 3 * width // 4, 3 * height // 4)
    return SceneSpec(width, height, k, (
        PlaneSpec(depth=far, texture=TextureSpec(seed=seed)),
        PlaneSpec(depth=near, texture=TextureSpec(seed=seed + 50),
                  region=region),
    ), pose, **scene_kwargs)
