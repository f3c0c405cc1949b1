"""Core pixel containers and camera intrinsics.

Conventions used across the whole package:

* images/depth are row-major with the origin at the top-left pixel,
  ``(x, y) = (column, row)``, pixel centers at integer coordinates;
* intensities are unit-normalized float64 in [0, 1], converted exactly once
  at file I/O;
* all containers are immutable after construction (their arrays are marked
  read-only) and therefore safe to share across threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidDepth, ValidationError


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageBuffer:
    """H x W x C float64 intensity image, C in {1, 3}.

    Synthesis and I/O operations guarantee values in [0, 1]; derived maps
    (e.g. per-pixel SSIM) reuse the container with their own documented
    range.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionMismatch(
                f"image must be HxWxC with C in {{1,3}}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite values")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def plane(self, c=0):
        return self.data[:, :, c]

    def to_gray(self):
        """Channel-mean single-channel view of the image."""
        if self.channels == 1:
            return self
        return ImageBuffer(self.data.mean(axis=2))

    def to_rgb(self):
        if self.channels == 3:
            return self
        return ImageBuffer(np.repeat(self.data, 3, axis=2))


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel scene depth in meters; ``valid`` flags usable pixels.

    ``valid=None`` means every pixel is valid, in which case all entries
    must be finite and > 0.
    """

    data: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch(f"depth must be HxW, got shape {arr.shape}")
        if self.valid is not None:
            mask = np.asarray(self.valid, dtype=bool)
            if mask.shape != arr.shape:
                raise DimensionMismatch("depth/valid shape mismatch")
            check = arr[mask]
            object.__setattr__(self, "valid", _freeze(mask))
        else:
            check = arr
        if check.size and (not np.all(np.isfinite(check)) or np.any(check <= 0)):
            raise InvalidDepth("depth values must be finite and > 0 where valid")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def valid_mask(self):
        if self.valid is None:
            return np.ones(self.data.shape, dtype=bool)
        return self.valid


@dataclass(frozen=True)
class TransmissionMap:
    """Per-pixel transmission t in [0, 1].

    0 is the fully-opaque limit (reachable by exp(-beta*d) underflow for
    far scenes); estimators that promise a lower clamp enforce their
    configured floor on top of this container.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch(
                f"transmission must be HxW, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise ValidationError("transmission values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")

    def matrix(self):
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def as_params(self):
        return np.array([self.fx, self.fy, self.cx, self.cy], dtype=np.float64)

    def scaled(self, s: float) -> "CameraIntrinsics":
        """Intrinsics after resampling the image by factor s (pixel-center
        convention: original coordinate u maps to s*u + (s-1)/2)."""
        half = (s - 1.0) / 2.0
        return CameraIntrinsics(self.fx * s, self.fy * s,
                                self.cx * s + half, self.cy * s + half)


def default_intrinsics(width: int, height: int) -> CameraIntrinsics:
    """Reasonable pinhole guess when no calibration is given: focal length
    equal to the larger image dimension, principal point at the center."""
    f = float(max(width, height))
    return CameraIntrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0)
