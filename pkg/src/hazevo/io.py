"""File I/O: PNG images, PFM depth maps, KITTI odometry pose files.

Intensity conversion happens exactly here and nowhere else: 8-bit values map
to v/255, 16-bit to v/65535.  PFM follows the usual convention (``Pf``
header, rows stored bottom-up, scale-line sign gives endianness).  KITTI
pose lines are 12 whitespace-separated floats, the row-major 3x4
camera-to-world matrix.
"""

import os
import re

import cv2
import numpy as np

from .errors import (InvalidDepth, IoError, MalformedHeader, MalformedLine,
                     NonRigid, UnsupportedFormat)
from .se3 import PoseSE3, nearest_rotation
from .types import DepthMap, ImageBuffer


def read_image(path) -> ImageBuffer:
    """Read an 8- or 16-bit PNG (grayscale or RGB) into unit floats."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise IoError(f"no such file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise UnsupportedFormat(f"cannot decode image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise UnsupportedFormat(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        data = raw.astype(np.float64)[:, :, None] / scale
    elif raw.ndim == 3 and raw.shape[2] == 3:
        data = raw[:, :, ::-1].astype(np.float64) / scale  # BGR -> RGB
    elif raw.ndim == 3 and raw.shape[2] == 4:
        data = raw[:, :, 2::-1].astype(np.float64) / scale  # drop alpha
    else:
        raise UnsupportedFormat(f"unsupported channel layout in {path}")
    return ImageBuffer(data)


def write_image(image: ImageBuffer, path, bit_depth: int = 8):
    """Write a PNG; intensities are clipped to [0,1] and quantized by
    rounding, so write(read(x)) is bit-identical for matching depths."""
    if bit_depth == 8:
        scale, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        scale, dtype = 65535.0, np.uint16
    else:
        raise UnsupportedFormat(f"bit_depth must be 8 or 16, got {bit_depth}")
    arr = np.clip(image.data, 0.0, 1.0)
    quant = np.rint(arr * scale).astype(dtype)
    if quant.shape[2] == 1:
        out = quant[:, :, 0]
    else:
        out = quant[:, :, ::-1]  # RGB -> BGR
    if not cv2.imwrite(os.fspath(path), out):
        raise IoError(f"cannot write image: {path}")


_PFM_TOKEN = re.compile(rb"\S+")


def read_depth_pfm(path) -> DepthMap:
    """Read a single-channel PFM depth map (float-exact)."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from None
    tokens = []
    pos = 0
    for _ in range(4):
        m = _PFM_TOKEN.search(blob, pos)
        if m is None:
            raise MalformedHeader(f"truncated PFM header in {path}")
        tokens.append(m.group(0))
        pos = m.end()
    if tokens[0] == b"PF":
        raise UnsupportedFormat("3-channel PFM not supported for depth")
    if tokens[0] != b"Pf":
        raise MalformedHeader(f"bad PFM magic {tokens[0]!r} in {path}")
    try:
        width = int(tokens[1])
        height = int(tokens[2])
        scale = float(tokens[3])
    except ValueError:
        raise MalformedHeader(f"non-numeric PFM header fields in {path}") from None
    if width <= 0 or height <= 0 or scale == 0:
        raise MalformedHeader(f"bad PFM dimensions/scale in {path}")
    data_start = pos + 1  # single whitespace byte after the scale line
    count = width * height
    dt = np.dtype("<f4" if scale < 0 else ">f4")
    if len(blob) - data_start < 4 * count:
        raise MalformedHeader(f"PFM payload shorter than header promises in {path}")
    data = np.frombuffer(blob, dtype=dt, count=count, offset=data_start)
    arr = data.reshape(height, width)[::-1, :].astype(np.float64)  # bottom-up
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidDepth(f"non-positive or non-finite depth in {path}")
    return DepthMap(arr)


def write_depth_pfm(depth: DepthMap, path):
    """Write little-endian single-channel PFM (scale -1), rows bottom-up."""
    arr = depth.data.astype(np.float32)
    header = f"Pf\n{depth.width} {depth.height}\n-1.0\n".encode("ascii")
    try:
        with open(os.fspath(path), "wb") as f:
            f.write(header)
            f.write(arr[::-1, :].astype("<f4").tobytes())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from None


def write_pfm_raw(data, path):
    """PFM writer for maps without the positivity contract (e.g. t-maps)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise MalformedHeader("PFM payload must be 2-D")
    h, w = arr.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    with open(os.fspath(path), "wb") as f:
        f.write(header)
        f.write(arr[::-1, :].astype("<f4").tobytes())


def read_pfm_raw(path):
    """Counterpart of :func:`write_pfm_raw`; no value-range checks."""
    path = os.fspath(path)
    with open(path, "rb") as f:
        blob = f.read()
    tokens = []
    pos = 0
    for _ in range(4):
        m = _PFM_TOKEN.search(blob, pos)
        if m is None:
            raise MalformedHeader(f"truncated PFM header in {path}")
        tokens.append(m.group(0))
        pos = m.end()
    if tokens[0] != b"Pf":
        raise MalformedHeader(f"bad PFM magic {tokens[0]!r} in {path}")
    width, height, scale = int(tokens[1]), int(tokens[2]), float(tokens[3])
    dt = np.dtype("<f4" if scale < 0 else ">f4")
    if len(blob) - (pos + 1) < 4 * width * height:
        raise MalformedHeader(f"PFM payload shorter than header promises in {path}")
    data = np.frombuffer(blob, dtype=dt, count=width * height, offset=pos + 1)
    return data.reshape(height, width)[::-1, :].astype(np.float64)


def read_kitti_poses(path) -> list[PoseSE3]:
    """Parse KITTI ground-truth poses; tiny orthonormality drift from the
    ASCII truncation is silently repaired by polar decomposition."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="ascii") as f:
            lines = f.readlines()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from None
    poses = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 12:
            raise MalformedLine(
                f"{path}:{lineno}: expected 12 values, got {len(parts)}")
        try:
            vals = np.array([float(p) for p in parts], dtype=np.float64)
        except ValueError:
            raise MalformedLine(f"{path}:{lineno}: non-numeric value") from None
        if not np.all(np.isfinite(vals)):
            raise MalformedLine(f"{path}:{lineno}: non-finite value")
        mat = vals.reshape(3, 4)
        R = mat[:, :3]
        det = np.linalg.det(R)
        if abs(det - 1.0) > 1e-2:
            raise NonRigid(f"{path}:{lineno}: |det - 1| = {abs(det - 1.0):.3g}")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-6:
            R = nearest_rotation(R)
        poses.append(PoseSE3(R, mat[:, 3]))
    return poses


def write_kitti_poses(poses, path):
    """Serialize poses in the KITTI text format (17 significant digits,
    roundtrips well within 1e-6)."""
    with open(os.fspath(path), "w", encoding="ascii") as f:
        for p in poses:
            mat = np.hstack([p.rotation, p.translation[:, None]])
            f.write(" ".join(f"{v:.17g}" for v in mat.reshape(-1)) + "\n")
