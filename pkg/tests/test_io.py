import numpy as np
import pytest

from hazevo.errors import (InvalidDepth, IoError, MalformedHeader,
                           MalformedLine, UnsupportedFormat)
from hazevo.io import (read_depth_pfm, read_image, read_kitti_poses,
                       read_pfm_raw, write_depth_pfm, write_image,
                       write_kitti_poses, write_pfm_raw)
from hazevo.types import DepthMap, ImageBuffer

from conftest import random_pose


def test_all_black_png_reads_as_zeros(tmp_path):
    path = tmp_path / "black.png"
    write_image(ImageBuffer(np.zeros((8, 12, 3))), path)
    img = read_image(path)
    assert img.width == 12 and img.height == 8 and img.channels == 3
    assert np.array_equal(img.data, np.zeros((8, 12, 3)))


def test_all_white_png_reads_as_ones(tmp_path):
    path = tmp_path / "white.png"
    write_image(ImageBuffer(np.ones((6, 6, 1))), path)
    img = read_image(path)
    assert np.array_equal(img.data, np.ones((6, 6, 1)))


def test_png_roundtrip_bit_identical_8bit(tmp_path, rng):
    # start from exact 8-bit levels so read is exactly k/255
    levels = rng.integers(0, 256, size=(16, 20, 3))
    img = ImageBuffer(levels / 255.0)
    path = tmp_path / "rt.png"
    write_image(img, path)
    back = read_image(path)
    assert np.array_equal(back.data, img.data)
    write_image(back, tmp_path / "rt2.png")
    assert (tmp_path / "rt.png").read_bytes() == \
        (tmp_path / "rt2.png").read_bytes()


def test_png_16bit_roundtrip(tmp_path, rng):
    levels = rng.integers(0, 65536, size=(9, 7, 1))
    img = ImageBuffer(levels / 65535.0)
    path = tmp_path / "deep.png"
    write_image(img, path, bit_depth=16)
    back = read_image(path)
    assert np.array_equal(back.data, img.data)


def test_read_missing_image_raises(tmp_path):
    with pytest.raises(IoError):
        read_image(tmp_path / "nope.png")


def test_read_garbage_image_raises(tmp_path):
    p = tmp_path / "junk.png"
    p.write_bytes(b"not a png at all")
    with pytest.raises(UnsupportedFormat):
        read_image(p)


def test_pfm_constant_depth(tmp_path):
    path = tmp_path / "flat.pfm"
    write_depth_pfm(DepthMap(np.full((5, 4), 10.0)), path)
    depth = read_depth_pfm(path)
    assert np.array_equal(depth.data, np.full((5, 4), 10.0))


def test_pfm_roundtrip_bit_identical(tmp_path, rng):
    vals = rng.uniform(0.01, 900.0, (13, 11)).astype(np.float32)
    d = DepthMap(vals.astype(np.float64))
    path = tmp_path / "rt.pfm"
    write_depth_pfm(d, path)
    back = read_depth_pfm(path)
    assert np.array_equal(back.data.astype(np.float32), vals)


def test_pfm_big_endian_read(tmp_path):
    vals = np.array([[1.5, 2.5], [3.5, 4.5]], dtype=">f4")
    path = tmp_path / "be.pfm"
    with open(path, "wb") as f:
        f.write(b"Pf\n2 2\n1.0\n")  # positive scale: big-endian
        f.write(vals[::-1, :].tobytes())
    back = read_depth_pfm(path)
    assert np.array_equal(back.data, vals.astype(np.float64))


def test_pfm_negative_depth_rejected(tmp_path):
    path = tmp_path / "neg.pfm"
    write_pfm_raw(np.array([[1.0, -2.0]]), path)
    with pytest.raises(InvalidDepth):
        read_depth_pfm(path)


def test_pfm_malformed_header(tmp_path):
    p = tmp_path / "bad.pfm"
    p.write_bytes(b"PX\n2 2\n-1.0\n" + b"\0" * 16)
    with pytest.raises(MalformedHeader):
        read_depth_pfm(p)
    p.write_bytes(b"Pf\n2\n")
    with pytest.raises(MalformedHeader):
        read_depth_pfm(p)
    p.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\0" * 8)  # payload too short
    with pytest.raises(MalformedHeader):
        read_depth_pfm(p)


def test_pfm_raw_roundtrip(tmp_path, rng):
    vals = rng.uniform(-1.0, 1.0, (6, 8)).astype(np.float32)
    path = tmp_path / "raw.pfm"
    write_pfm_raw(vals, path)
    assert np.array_equal(read_pfm_raw(path).astype(np.float32), vals)


def test_kitti_identity_line(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n")
    poses = read_kitti_poses(p)
    assert len(poses) == 1
    assert np.array_equal(poses[0].rotation, np.eye(3))
    assert np.array_equal(poses[0].translation, np.zeros(3))


def test_kitti_wrong_count_rejected(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1\n")  # 11 numbers
    with pytest.raises(MalformedLine):
        read_kitti_poses(p)


def test_kitti_non_finite_rejected(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 nan 0 0 1 0\n")
    with pytest.raises(MalformedLine):
        read_kitti_poses(p)


def test_kitti_roundtrip_within_tolerance(tmp_path, rng):
    poses = [random_pose(rng) for _ in range(25)]
    p = tmp_path / "poses.txt"
    write_kitti_poses(poses, p)
    back = read_kitti_poses(p)
    for a, b in zip(poses, back):
        assert np.abs(a.matrix() - b.matrix()).max() < 1e-6


def test_kitti_reorthonormalizes_truncated_ascii(tmp_path, rng):
    pose = random_pose(rng)
    mat = np.hstack([pose.rotation, pose.translation[:, None]])
    # 5 significant digits: drift above the 1e-6 repair threshold
    line = " ".join(f"{v:.5f}" for v in mat.reshape(-1))
    p = tmp_path / "poses.txt"
    p.write_text(line + "\n")
    back = read_kitti_poses(p)[0]
    r = back.rotation
    assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
    assert np.abs(r - pose.rotation).max() < 1e-3
