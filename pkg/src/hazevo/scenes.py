"""Synthetic ground-truth scenes: fronto-parallel textured planes rendered
analytically into two views.

View 1 evaluates each plane's procedural texture directly; view 2 is
rendered through the exact per-plane homography induced by (pose, plane
depth, intrinsics).  Because the texture is a continuous function of
image-1 coordinates, *both* views are interpolation-free, which makes the
pair + depths + pose an independent oracle for the warp module (that one
reconstructs by bilinear resampling instead).

Textures are seeded lattice value noise (splitmix64 hashing, smoothstep
interpolation), so any coordinate — including outside the frame — is
defined and deterministic.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .fog import FogParams, synthesize_haze, transmission_from_depth
from .se3 import PoseSE3
from .types import CameraIntrinsics, DepthMap, ImageBuffer

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    # 1-d+ arrays only: numpy warns on uint64 scalar wraparound
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _hash01(ix, iy, salt):
    """Deterministic lattice hash -> float64 in [0, 1)."""
    ix = np.atleast_1d(ix).astype(np.int64).view(np.uint64)
    iy = np.atleast_1d(iy).astype(np.int64).view(np.uint64)
    salt = np.atleast_1d(np.asarray(salt, dtype=np.uint64))
    h = _mix64(ix ^ _mix64(iy ^ _mix64(salt)))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 2 ** 53)


def _smoothstep(f):
    return f * f * (3.0 - 2.0 * f)


def value_noise(u, v, salt, scale: float):
    """Smoothstep-interpolated value noise with lattice spacing ``scale``
    pixels; defined for any real coordinates."""
    su = np.asarray(u, dtype=np.float64) / scale
    sv = np.asarray(v, dtype=np.float64) / scale
    iu = np.floor(su)
    iv = np.floor(sv)
    fu = _smoothstep(su - iu)
    fv = _smoothstep(sv - iv)
    iu = iu.astype(np.int64)
    iv = iv.astype(np.int64)
    v00 = _hash01(iu, iv, salt)
    v10 = _hash01(iu + 1, iv, salt)
    v01 = _hash01(iu, iv + 1, salt)
    v11 = _hash01(iu + 1, iv + 1, salt)
    top = v00 * (1.0 - fu) + v10 * fu
    bot = v01 * (1.0 - fu) + v11 * fu
    return top * (1.0 - fv) + bot * fv


@dataclass(frozen=True)
class TextureSpec:
    """Procedural texture: fractal value noise plus optional near-black
    dot lattice (``dark_dot_spacing``) that guarantees a zero dark channel
    in every patch — the scene family the DCP estimators are tested on."""

    seed: int
    octaves: int = 3
    contrast: float = 0.8
    base_scale: float = 16.0
    dark_dot_spacing: float | None = None
    dark_dot_radius: float = 1.2

    def __post_init__(self):
        if self.octaves < 1:
            raise InvalidSpec("texture octaves must be >= 1")
        if not 0.0 <= self.contrast <= 1.0:
            raise InvalidSpec("texture contrast must be in [0, 1]")
        if self.base_scale <= 0:
            raise InvalidSpec("texture base_scale must be > 0")

    def sample(self, u, v):
        """Evaluate the 3-channel texture at continuous image-1 coords."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        out = np.empty(u.shape + (3,), dtype=np.float64)
        for c in range(3):
            acc = np.zeros_like(u)
            norm = 0.0
            amp = 1.0
            for k in range(self.octaves):
                salt = (self.seed * 1315423911 + c * 2654435761 + k) \
                    % (1 << 63)
                acc += amp * value_noise(u * (2.0 ** k), v * (2.0 ** k),
                                         salt, self.base_scale)
                norm += amp
                amp *= 0.5
            n = acc / norm
            out[..., c] = np.clip(0.5 + self.contrast * (n - 0.5) * 2.0,
                                  0.0, 1.0)
        if self.dark_dot_spacing is not None:
            s = self.dark_dot_spacing
            du = u - s * np.round(u / s)
            dv = v - s * np.round(v / s)
            dist = np.sqrt(du * du + dv * dv)
            # flat zero core of radius dark_dot_radius, 1px smooth falloff
            fade = np.clip(dist - self.dark_dot_radius, 0.0, 1.0)
            out *= _smoothstep(fade)[..., None]
        return out


@dataclass(frozen=True)
class PlaneSpec:
    """Fronto-parallel plane at constant frame-1 depth; ``region`` is the
    half-open rectangle (x0, y0, x1, y1) it occupies in image-1
    coordinates, None for the infinite background plane."""

    depth: float
    texture: TextureSpec
    region: tuple | None = None

    def __post_init__(self):
        if not (np.isfinite(self.depth) and self.depth > 0):
            raise InvalidSpec("plane depth must be finite and > 0")
        if self.region is not None:
            x0, y0, x1, y1 = self.region
            if not (x1 > x0 and y1 > y0):
                raise InvalidSpec(f"degenerate plane region {self.region}")

    def covers(self, u, v):
        if self.region is None:
            return np.ones(np.shape(u), dtype=bool)
        x0, y0, x1, y1 = self.region
        return (u >= x0) & (u < x1) & (v >= y0) & (v < y1)


@dataclass(frozen=True)
class IlluminationSpec:
    """Global gain/bias plus a seeded smooth multiplicative field in
    [1 - amplitude, 1 + amplitude]."""

    global_gain: float = 1.0
    global_bias: float = 0.0
    field_seed: int = 0
    field_scale: float = 24.0
    field_amplitude: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.field_amplitude < 1.0):
            raise InvalidSpec("illumination amplitude must be in [0, 1)")
        if self.global_gain <= 0:
            raise InvalidSpec("illumination gain must be > 0")
        if self.field_scale <= 0:
            raise InvalidSpec("illumination field scale must be > 0")


@dataclass(frozen=True)
class SceneSpec:
    """Complete two-view scene description with exact ground truth.

    ``relative_pose`` is the coordinate transform from frame-1 camera
    coordinates to frame-2 camera coordinates (X2 = R X1 + t).
    Illumination, when present, perturbs image 2 only.
    """

    width: int
    height: int
    intrinsics: CameraIntrinsics
    planes: tuple
    relative_pose: PoseSE3
    illumination: IlluminationSpec | None = None
    fog: FogParams | None = None

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise InvalidSpec("scene must be at least 8x8")
        if not self.planes:
            raise InvalidSpec("scene needs at least one plane")
        if self.planes[0].region is not None:
            raise InvalidSpec("first plane must be the background "
                              "(region=None)")
        object.__setattr__(self, "planes", tuple(self.planes))


def apply_illumination(image: ImageBuffer, spec: IlluminationSpec) -> ImageBuffer:
    """I' = clamp(gain * I * field + bias); field is seeded smooth value
    noise in [1 - amplitude, 1 + amplitude]."""
    h, w = image.height, image.width
    jj, ii = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    if spec.field_amplitude > 0:
        noise = value_noise(jj, ii, spec.field_seed * 786433 + 7,
                            spec.field_scale)
        fld = 1.0 + spec.field_amplitude * (2.0 * noise - 1.0)
    else:
        fld = np.ones((h, w))
    out = spec.global_gain * image.data * fld[:, :, None] + spec.global_bias
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def render_scene_pair(spec: SceneSpec):
    """Render (image1, image2, depth1, depth2, pose_gt) analytically.

    View 2 uses the closed-form per-plane homography, an implementation of
    the projection geometry independent of the warp module.
    """
    h, w = spec.height, spec.width
    k = spec.intrinsics
    jj, ii = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))

    planes = sorted(spec.planes, key=lambda p: p.depth)

    # view 1: nearest covering plane, texture evaluated in place
    img1 = np.zeros((h, w, 3))
    depth1 = np.zeros((h, w))
    undecided = np.ones((h, w), dtype=bool)
    for plane in planes:
        cover = plane.covers(jj, ii) & undecided
        if not cover.any():
            continue
        img1[cover] = plane.texture.sample(jj[cover], ii[cover])
        depth1[cover] = plane.depth
        undecided &= ~cover
    if undecided.any():
        raise InvalidSpec("background plane does not cover the frame")

    # view 2: cast each pixel's ray through the planes in depth order
    pose = spec.relative_pose
    if (np.array_equal(pose.rotation, np.eye(3))
            and not pose.translation.any()):
        image1 = ImageBuffer(img1)
        image2 = image1
        if spec.illumination is not None:
            image2 = apply_illumination(image2, spec.illumination)
        d1 = DepthMap(depth1)
        return image1, image2, d1, DepthMap(depth1.copy()), pose
    rot_t = pose.rotation.T
    c_vec = -rot_t @ pose.translation  # camera-2 center in frame-1 coords
    ray_x = (jj - k.cx) / k.fx
    ray_y = (ii - k.cy) / k.fy
    # frame-1 direction of each view-2 pixel ray
    dir1_x = rot_t[0, 0] * ray_x + rot_t[0, 1] * ray_y + rot_t[0, 2]
    dir1_y = rot_t[1, 0] * ray_x + rot_t[1, 1] * ray_y + rot_t[1, 2]
    dir1_z = rot_t[2, 0] * ray_x + rot_t[2, 1] * ray_y + rot_t[2, 2]

    img2 = np.zeros((h, w, 3))
    depth2 = np.zeros((h, w))
    undecided = np.ones((h, w), dtype=bool)
    for plane in planes:
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (plane.depth - c_vec[2]) / dir1_z
        hit = undecided & np.isfinite(lam) & (lam > 1e-6)
        if not hit.any():
            continue
        x1 = lam * dir1_x + c_vec[0]
        y1 = lam * dir1_y + c_vec[1]
        u1 = k.fx * (x1 / plane.depth) + k.cx
        v1 = k.fy * (y1 / plane.depth) + k.cy
        hit &= plane.covers(u1, v1)
        if not hit.any():
            continue
        img2[hit] = plane.texture.sample(u1[hit], v1[hit])
        depth2[hit] = lam[hit]
        undecided &= ~hit
    if undecided.any():
        raise InvalidSpec(
            "view-2 rays escape every plane; motion too large for the scene")

    image2 = ImageBuffer(img2)
    if spec.illumination is not None:
        image2 = apply_illumination(image2, spec.illumination)
    return (ImageBuffer(img1), image2, DepthMap(depth1), DepthMap(depth2),
            pose)


def make_foggy_pair(spec: SceneSpec):
    """Clear pair + per-frame transmission maps + hazy pair, composed from
    the scene's fog parameters.

    Returns (hazy1, hazy2, t1, t2, clear1, clear2, depth1, depth2, pose).
    """
    if spec.fog is None:
        raise InvalidSpec("make_foggy_pair needs spec.fog")
    img1, img2, depth1, depth2, pose = render_scene_pair(spec)
    t1 = transmission_from_depth(depth1, spec.fog.beta)
    t2 = transmission_from_depth(depth2, spec.fog.beta)
    hazy1 = synthesize_haze(img1, t1, spec.fog)
    hazy2 = synthesize_haze(img2, t2, spec.fog)
    return hazy1, hazy2, t1, t2, img1, img2, depth1, depth2, pose
