import numpy as np
import pytest

from hazevo.errors import ExtractorShapeMismatch, MalformedHeader
from hazevo.features import (ConvPyramidExtractor, SharpnessDiscriminator,
                             read_tensor_file, write_tensor_file)
from hazevo.types import ImageBuffer


def test_tensor_file_roundtrip(tmp_path, rng):
    tensors = {
        "conv0": rng.standard_normal((8, 3, 3, 3)).astype(np.float32),
        "bias": rng.standard_normal(8).astype(np.float32),
    }
    path = tmp_path / "weights.hzfx"
    write_tensor_file(path, tensors)
    back = read_tensor_file(path)
    assert set(back) == set(tensors)
    for name in tensors:
        assert np.array_equal(back[name],
                              np.asarray(tensors[name], dtype=np.float32))


def test_tensor_file_magic_and_truncation(tmp_path):
    p = tmp_path / "bad.hzfx"
    p.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(MalformedHeader):
        read_tensor_file(p)
    p.write_bytes(b"HZFX" + (1).to_bytes(4, "little") + b"\x08\x00")
    with pytest.raises(MalformedHeader):
        read_tensor_file(p)


def test_extractor_deterministic_and_shapes(rng):
    fx1 = ConvPyramidExtractor()
    fx2 = ConvPyramidExtractor()
    img = ImageBuffer(rng.random((48, 40, 3)))
    f1 = fx1(img)
    f2 = fx2(img)
    assert np.array_equal(f1, f2)
    # three stride-2 stages: ceil(48/8) x ceil(40/8) x 32
    assert f1.shape == (6, 5, 32)


def test_extractor_handles_grayscale(rng):
    fx = ConvPyramidExtractor()
    gray = ImageBuffer(rng.random((32, 32, 1)))
    rgb = gray.to_rgb()
    assert np.array_equal(fx(gray), fx(rgb))


def test_extractor_weight_file_roundtrip(tmp_path, rng):
    fx = ConvPyramidExtractor()
    path = tmp_path / "pyramid.hzfx"
    fx.save(path)
    loaded = ConvPyramidExtractor.from_file(path)
    img = ImageBuffer(rng.random((40, 40, 3)))
    # float32 container quantizes the weights, so results are close
    assert np.abs(fx(img) - loaded(img)).max() < 1e-5


def test_extractor_external_weights_metadata(tmp_path, rng):
    fx = ConvPyramidExtractor()
    path = tmp_path / "ext.hzfx"
    fx.save(path)
    loaded = ConvPyramidExtractor.from_file(path, stage="(5,1)")
    assert loaded.stage == "(5,1)"


def test_extractor_rejects_bad_stage_shapes():
    with pytest.raises(ExtractorShapeMismatch):
        ConvPyramidExtractor(weights=[np.zeros((8, 3, 3, 3))] * 2)
    with pytest.raises(ExtractorShapeMismatch):
        ConvPyramidExtractor(weights=[np.zeros((8, 3, 3, 3)),
                                      np.zeros((16, 3, 3, 9)),
                                      np.zeros((32, 3, 3, 16))])


def test_extractor_invariant_to_global_affine_illumination(rng):
    # zero-mean kernels kill the offset, output normalization the gain
    fx = ConvPyramidExtractor()
    img = ImageBuffer(rng.uniform(0.2, 0.6, (40, 40, 3)))
    relit = ImageBuffer(np.clip(img.data * 1.25 + 0.05, 0, 1))
    assert (relit.data > 0).all() and (relit.data < 1).all()
    assert np.abs(fx(img) - fx(relit)).max() < 1e-6


def test_extractor_distinguishes_content(rng):
    fx = ConvPyramidExtractor()
    a = ImageBuffer(rng.random((40, 40, 3)))
    b = ImageBuffer(np.random.default_rng(999).random((40, 40, 3)))
    assert np.abs(fx(a) - fx(b)).max() > 1e-3


def test_sharpness_discriminator_orders_blur(rng):
    from hazevo.kernels import box_mean

    disc = SharpnessDiscriminator()
    sharp = ImageBuffer((rng.random((32, 32, 3)) > 0.5).astype(np.float64))
    smooth_data = np.stack([box_mean(sharp.plane(c), 3) for c in range(3)],
                           axis=2)
    smooth = ImageBuffer(smooth_data)
    s_sharp = disc(sharp)
    s_smooth = disc(smooth)
    assert 0.0 <= s_sharp <= 1.0 and 0.0 <= s_smooth <= 1.0
    # the statistic scores smooth inputs closer to 1
    assert s_smooth > s_sharp
    assert disc(sharp) == disc(sharp)
