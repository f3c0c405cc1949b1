"""View reconstruction: backproject target pixels through depth, transform
by the relative pose, project into the source view, bilinear-sample.

Pose direction convention (fixed package-wide): ``pose`` maps
*target-camera* coordinates to *source-camera* coordinates, i.e. the
reconstruction of the target image samples the source image at
K_src * (R * depth * K_tgt^-1 * p + t).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .kernels import bilinear_sample_k, warp_field_k
from .se3 import PoseSE3
from .types import CameraIntrinsics, DepthMap, ImageBuffer

EPS_Z = 1e-3  # positive-depth guard in meters


@dataclass(frozen=True)
class WarpField:
    """Continuous source coordinates per target pixel plus validity
    (in-bounds and in front of the source camera)."""

    coords: np.ndarray  # (H, W, 2): x then y
    valid: np.ndarray   # (H, W) bool

    @property
    def height(self):
        return self.coords.shape[0]

    @property
    def width(self):
        return self.coords.shape[1]


@dataclass(frozen=True)
class ReconstructedView:
    image: ImageBuffer
    valid: np.ndarray
    coverage: float


def warp_field(depth_target: DepthMap, pose: PoseSE3,
               k_src: CameraIntrinsics, k_tgt: CameraIntrinsics,
               src_width: int | None = None, src_height: int | None = None,
               eps_z: float = EPS_Z) -> WarpField:
    """Project every target pixel into the source view through its depth.

    Source image dimensions default to the target's.
    """
    w = depth_target.width if src_width is None else src_width
    h = depth_target.height if src_height is None else src_height
    xs, ys, _, valid = warp_field_k(
        depth_target.data, depth_target.valid_mask(),
        pose.rotation, pose.translation,
        k_tgt.as_params(), k_src.as_params(), w, h, eps_z)
    coords = np.stack([xs, ys], axis=2)
    return WarpField(coords, valid)


def bilinear_sample(source: ImageBuffer, field: WarpField) -> ReconstructedView:
    """Sample the source at the field's coordinates; invalid pixels are 0
    and excluded via the mask.  Exact at integer coordinates."""
    xs = field.coords[:, :, 0]
    ys = field.coords[:, :, 1]
    if np.any((xs[field.valid] > source.width - 1) |
              (ys[field.valid] > source.height - 1)):
        raise DimensionMismatch("warp field exceeds source image bounds")
    data = bilinear_sample_k(source.data, xs, ys, field.valid)
    coverage = float(np.count_nonzero(field.valid)) / field.valid.size
    return ReconstructedView(ImageBuffer(data), field.valid, coverage)


def reconstruct_view(source: ImageBuffer, depth_target: DepthMap,
                     pose: PoseSE3, k: CameraIntrinsics,
                     k_src: CameraIntrinsics | None = None) -> ReconstructedView:
    """Synthesize the target image from the source image, the target depth
    and the target->source pose."""
    field = warp_field(depth_target, pose, k_src or k, k,
                       source.width, source.height)
    return bilinear_sample(source, field)
