import math

import numpy as np
import pytest

from hazevo.errors import (DimensionMismatch, EmptyMask,
                           ExtractorShapeMismatch, NonFiniteComponent)
from hazevo.features import ConvPyramidExtractor
from hazevo.fog import FogParams, dehaze, synthesize_haze
from hazevo.losses import (LossComponents, LossWeights, SsimConfig,
                           appearance_loss, aux_transmission_loss,
                           central_gradients, cycle_pose_loss, gradient_loss,
                           haze_reconstruction_loss, lsgan_discriminator_loss,
                           lsgan_generator_loss, perceptual_loss,
                           smoothness_loss, ssim_map, total_gan_loss,
                           total_loss)
from hazevo.scenes import (IlluminationSpec, apply_illumination,
                           render_scene_pair)
from hazevo.se3 import se3_exp
from hazevo.types import DepthMap, ImageBuffer, TransmissionMap
from hazevo.warp import ReconstructedView

from conftest import single_plane_scene, two_plane_scene


def full_view(image: ImageBuffer) -> ReconstructedView:
    return ReconstructedView(image, np.ones((image.height, image.width),
                                            dtype=bool), 1.0)


# --- SSIM -------------------------------------------------------------------

def test_ssim_self_similarity_is_exactly_one(rng):
    img = ImageBuffer(rng.random((16, 16, 3)))
    s = ssim_map(img, img)
    assert np.array_equal(s.plane(), np.ones((16, 16)))


def test_ssim_constant_images_scalar_value():
    cfg = SsimConfig()
    a = ImageBuffer(np.zeros((8, 8, 1)))
    b = ImageBuffer(np.ones((8, 8, 1)))
    # oracle: mu_a=0, mu_b=1, all sigmas 0 ->
    # (c1 * c2) / ((1 + c1) * c2) = c1 / (1 + c1)
    expected = cfg.c1 / (1.0 + cfg.c1)
    s = ssim_map(a, b, cfg)
    assert np.abs(s.plane() - expected).max() < 1e-15
    assert abs(expected - 0.0001) < 2e-8


def test_ssim_symmetric_exactly(rng):
    a = ImageBuffer(rng.random((12, 12, 3)))
    b = ImageBuffer(rng.random((12, 12, 3)))
    assert np.array_equal(ssim_map(a, b).plane(), ssim_map(b, a).plane())


def test_ssim_range(rng):
    a = ImageBuffer(rng.random((20, 20, 1)))
    b = ImageBuffer(1.0 - a.data)
    s = ssim_map(a, b).plane()
    assert s.min() >= -1.0 - 1e-12 and s.max() <= 1.0 + 1e-12


# --- appearance ----------------------------------------------------------------

def test_appearance_zero_on_identical(rng):
    img = ImageBuffer(rng.random((10, 10, 3)))
    assert appearance_loss(full_view(img), img) == 0.0


def test_appearance_alpha_zero_is_mean_absolute_error(rng):
    a = ImageBuffer(rng.random((9, 9, 3)))
    b = ImageBuffer(rng.random((9, 9, 3)))
    loss = appearance_loss(full_view(a), b, alpha=0.0)
    mae = np.abs(a.data - b.data).mean()
    assert abs(loss - mae) < 1e-12


def test_appearance_alpha_one_constant_images():
    cfg = SsimConfig()
    a = ImageBuffer(np.zeros((8, 8, 1)))
    b = ImageBuffer(np.ones((8, 8, 1)))
    loss = appearance_loss(full_view(a), b, alpha=1.0, cfg=cfg)
    expected = (1.0 - cfg.c1 / (1.0 + cfg.c1)) / 2.0
    assert abs(loss - expected) < 1e-12
    assert abs(expected - 0.49995) < 1e-7


def test_appearance_empty_mask_raises(rng):
    img = ImageBuffer(rng.random((6, 6, 3)))
    empty = ReconstructedView(img, np.zeros((6, 6), dtype=bool), 0.0)
    with pytest.raises(EmptyMask):
        appearance_loss(empty, img)


def test_appearance_respects_mask(rng):
    a = ImageBuffer(rng.random((8, 8, 3)))
    b = ImageBuffer(rng.random((8, 8, 3)))
    mask = np.zeros((8, 8), dtype=bool)
    mask[:4] = True
    masked = ReconstructedView(a, mask, 0.5)
    loss = appearance_loss(masked, b, alpha=0.0)
    assert abs(loss - np.abs(a.data - b.data).mean(axis=2)[mask].mean()) < 1e-12


# --- smoothness -------------------------------------------------------------------

def test_smoothness_constant_depth_is_zero(rng):
    depth = DepthMap(np.full((7, 7), 4.2))
    img = ImageBuffer(rng.random((7, 7, 3)))
    assert smoothness_loss(depth, img) == 0.0


def test_smoothness_ramp_on_constant_image():
    # 4x4 ramp along x with slope 0.5/px on a flat image: loss = 0.5
    depth = DepthMap(1.0 + 0.5 * np.tile(np.arange(4.0), (4, 1)))
    img = ImageBuffer(np.full((4, 4, 3), 0.3))
    loss = smoothness_loss(depth, img)
    assert abs(loss - 0.5) < 1e-12


def test_smoothness_edge_aware_downweighting():
    depth = DepthMap(1.0 + 0.5 * np.tile(np.arange(8.0), (8, 1)))
    flat = ImageBuffer(np.full((8, 8, 3), 0.3))
    edged_data = np.full((8, 8, 3), 0.1)
    edged_data[:, 4:] = 0.9  # strong edge aligned with the ramp
    edged = ImageBuffer(edged_data)
    assert smoothness_loss(depth, edged) < smoothness_loss(depth, flat)


# --- haze reconstruction / aux transmission ------------------------------------------

def test_haze_rec_zero_on_identical(rng):
    img = ImageBuffer(rng.random((11, 5, 3)))
    assert haze_reconstruction_loss(img, img) == 0.0


def test_haze_rec_constant_offset():
    a = ImageBuffer(np.full((6, 6, 3), 0.5))
    b = ImageBuffer(np.full((6, 6, 3), 0.6))
    assert abs(haze_reconstruction_loss(a, b) - 0.1) < 1e-12


def test_haze_rec_resolution_independent(rng):
    small = rng.random((4, 4, 3))
    a_s = ImageBuffer(small)
    b_s = ImageBuffer(np.clip(small + 0.05, 0, 1))
    big = np.tile(small, (4, 4, 1))
    a_b = ImageBuffer(big)
    b_b = ImageBuffer(np.clip(big + 0.05, 0, 1))
    assert abs(haze_reconstruction_loss(a_s, b_s)
               - haze_reconstruction_loss(a_b, b_b)) < 1e-12


def test_haze_rec_roundtrip_recomposition(rng):
    clear = ImageBuffer(rng.uniform(0.1, 0.9, (12, 12, 3)))
    t = TransmissionMap(rng.uniform(0.2, 1.0, (12, 12)))
    fog = FogParams(0.9, 0.05)
    hazy = synthesize_haze(clear, t, fog)
    recomposed = synthesize_haze(dehaze(hazy, t, fog), t, fog)
    assert haze_reconstruction_loss(recomposed, hazy) < 1e-6


def test_aux_transmission_examples(rng):
    t1 = TransmissionMap(rng.uniform(0.2, 0.9, (10, 10)))
    assert aux_transmission_loss(t1, t1) == 0.0
    t2 = TransmissionMap(t1.data + 0.05)
    assert abs(aux_transmission_loss(t1, t2) - 0.05) < 1e-12


# --- gradient loss --------------------------------------------------------------------

def test_gradient_loss_zero_on_identical(rng):
    img = ImageBuffer(rng.random((14, 14, 3)))
    assert gradient_loss(img, img) == 0.0


def test_gradient_loss_invariant_to_global_bias(rng):
    # 8-bit-style dyadic intensities and a dyadic offset: the shift is
    # representable exactly, so the invariance must hold bitwise
    img = ImageBuffer(rng.integers(0, 192, (16, 16, 3)) / 256.0)
    shifted = ImageBuffer(img.data + 0.25)
    assert gradient_loss(shifted, img) == 0.0


def test_gradient_loss_gain_linearity(rng):
    img = ImageBuffer(rng.uniform(0.0, 0.5, (16, 16, 3)))
    g = 1.8
    scaled = ImageBuffer(img.data * g)
    gx, gy = central_gradients(img)
    mean_mag = np.sqrt(gx * gx + gy * gy).mean()
    loss = gradient_loss(scaled, img)
    assert abs(loss - abs(g - 1.0) * mean_mag) < 1e-12


def test_gradient_loss_empty_mask(rng):
    img = ImageBuffer(rng.random((5, 5, 1)))
    with pytest.raises(EmptyMask):
        gradient_loss(img, img, mask=np.zeros((5, 5), dtype=bool))


# --- perceptual loss -------------------------------------------------------------------

def test_perceptual_zero_on_identical(rng):
    fx = ConvPyramidExtractor()
    img = ImageBuffer(rng.random((32, 32, 3)))
    assert perceptual_loss(img, img, fx) == 0.0


def test_perceptual_symmetric(rng):
    fx = ConvPyramidExtractor()
    a = ImageBuffer(rng.random((24, 24, 3)))
    b = ImageBuffer(rng.random((24, 24, 3)))
    assert perceptual_loss(a, b, fx) == perceptual_loss(b, a, fx)


def test_perceptual_prefers_relit_over_different_scene():
    # re-lit target is perceptually closer than a different scene at the
    # same pixel-space distance
    fx = ConvPyramidExtractor()
    img1, *_ = render_scene_pair(single_plane_scene(seed=3))
    other, *_ = render_scene_pair(single_plane_scene(seed=77))
    relit = apply_illumination(
        img1, IlluminationSpec(global_gain=1.15, global_bias=0.03,
                               field_seed=4, field_amplitude=0.15))
    mae_relit = np.abs(relit.data - img1.data).mean()
    mae_other = np.abs(other.data - img1.data).mean()
    # blend the other scene toward img1 until pixel distances match
    s = mae_relit / mae_other
    blended = ImageBuffer(img1.data + (other.data - img1.data) * s)
    assert abs(np.abs(blended.data - img1.data).mean() - mae_relit) < 1e-12
    assert perceptual_loss(img1, relit, fx) < perceptual_loss(img1, blended, fx)


def test_perceptual_shape_mismatch(rng):
    def bad_extractor(img):
        return np.zeros((4, 4, img.width))

    a = ImageBuffer(rng.random((16, 16, 3)))
    b = ImageBuffer(rng.random((16, 16, 3)))
    ok = perceptual_loss(a, b, bad_extractor)
    assert ok == 0.0

    calls = []

    def flaky(img):
        calls.append(1)
        return np.zeros((4, 4, len(calls)))

    with pytest.raises(ExtractorShapeMismatch):
        perceptual_loss(a, b, flaky)


# --- LSGAN -----------------------------------------------------------------------------

def test_lsgan_discriminator_examples():
    assert lsgan_discriminator_loss(1.0, 0.0) == 0.0
    assert abs(lsgan_discriminator_loss(0.5, 0.5) - 0.5) < 1e-15
    assert abs(lsgan_discriminator_loss(0.0, 1.0) - 2.0) < 1e-15


def test_lsgan_generator_examples():
    assert lsgan_generator_loss(1.0) == 0.0
    assert lsgan_generator_loss(0.0) == 1.0
    assert abs(lsgan_generator_loss(0.5) - 0.25) < 1e-15


def test_lsgan_batch_means(rng):
    real = rng.random(32)
    fake = rng.random(32)
    expected = np.mean((real - 1) ** 2) + np.mean(fake ** 2)
    assert abs(lsgan_discriminator_loss(real, fake) - expected) < 1e-12


def test_total_gan_perfect_discriminator_halves():
    # real = 1, fake = 1: D loss = 1 per half, G loss = 0 per half
    assert abs(total_gan_loss((1.0, 1.0), (1.0, 1.0)) - 2.0) < 1e-15
    # real = 1, fake = 0: D loss = 0 per half, G loss = 1 per half
    assert abs(total_gan_loss((1.0, 0.0), (1.0, 0.0)) - 2.0) < 1e-15


def test_total_gan_additivity(rng):
    real, fake = float(rng.random()), float(rng.random())
    single = (lsgan_discriminator_loss(real, fake)
              + lsgan_generator_loss(fake))
    total = total_gan_loss((real, fake), (real, fake))
    assert abs(total - 2.0 * single) < 1e-12


def test_total_gan_constant_half_discriminator():
    # D == 0.5 everywhere: each half contributes 0.25+0.25 (D) + 0.25 (G),
    # total = 2 * 0.75 = 1.5; pins the full Eq.-level arithmetic
    assert abs(total_gan_loss((0.5, 0.5), (0.5, 0.5)) - 1.5) < 1e-15


# --- cycle pose loss --------------------------------------------------------------------

def test_cycle_zero_on_equal_poses(rng):
    p = se3_exp(rng.uniform(-0.5, 0.5, 6))
    assert cycle_pose_loss(p, p) == 0.0


def test_cycle_pure_translation():
    delta = np.array([0.3, -0.4, 1.2])
    p1 = se3_exp([0, 0, 0, 1.0, 2.0, 3.0])
    p2 = se3_exp(np.concatenate([[0, 0, 0], [1.0, 2.0, 3.0] + delta]))
    assert abs(cycle_pose_loss(p1, p2) - np.linalg.norm(delta)) < 1e-12


def test_cycle_pure_rotation_two_degrees():
    theta = math.radians(2.0)
    p1 = se3_exp(np.zeros(6))
    p2 = se3_exp([0, 0, theta, 0, 0, 0])
    loss = cycle_pose_loss(p1, p2)
    assert abs(loss - theta) < 1e-12
    assert abs(loss - 0.034907) < 1e-6


def test_cycle_symmetric(rng):
    for _ in range(20):
        pa = se3_exp(rng.uniform(-0.8, 0.8, 6))
        pb = se3_exp(rng.uniform(-0.8, 0.8, 6))
        assert abs(cycle_pose_loss(pa, pb) - cycle_pose_loss(pb, pa)) < 1e-12


def test_cycle_raw_difference_mode(rng):
    xa = rng.uniform(-0.5, 0.5, 6)
    xb = rng.uniform(-0.5, 0.5, 6)
    loss = cycle_pose_loss(se3_exp(xa), se3_exp(xb), raw_difference=True)
    assert abs(loss - np.linalg.norm(xa - xb)) < 1e-9


# --- total loss ---------------------------------------------------------------------------

def test_total_loss_all_zero():
    total, breakdown = total_loss(LossComponents(), LossWeights())
    assert total == 0.0
    assert all(v == 0.0 for v in breakdown.values())


def test_total_loss_unit_weights_unit_components():
    w = LossWeights(alpha=0.85, lambda_p=1, lambda_s=1, lambda_gan=1,
                    lambda_cyc=1, lambda_gra=1, lambda_per=1)
    comps = LossComponents(1, 1, 1, 1, 1, 1)
    total, _ = total_loss(comps, w)
    assert abs(total - 6.0) < 1e-15


def test_total_loss_weighted_dot_product():
    # independent oracle: plain dot product of weights and components
    w = LossWeights(alpha=0.85, lambda_p=0.85, lambda_s=0.1, lambda_gan=0.0,
                    lambda_cyc=0.05, lambda_gra=0.5, lambda_per=0.05)
    comps = LossComponents(1, 1, 1, 1, 1, 1)
    expected = float(np.dot([0.85, 0.1, 0.0, 0.05, 0.5, 0.05],
                            [1, 1, 1, 1, 1, 1]))
    total, _ = total_loss(comps, w)
    assert abs(total - expected) < 1e-12
    assert abs(expected - 1.55) < 1e-15


def test_total_loss_linear_in_each_weight(rng):
    comps = LossComponents(*rng.random(6))
    base = LossWeights()
    t1, _ = total_loss(comps, base)
    from dataclasses import replace
    for name in ("lambda_p", "lambda_s", "lambda_gan", "lambda_cyc",
                 "lambda_gra", "lambda_per"):
        bumped = replace(base, **{name: getattr(base, name) + 1.0})
        t2, _ = total_loss(comps, bumped)
        comp = getattr(comps, name.removeprefix("lambda_"))
        assert abs((t2 - t1) - comp) < 1e-12


def test_total_loss_rejects_non_finite():
    with pytest.raises(NonFiniteComponent):
        total_loss(LossComponents(p=float("nan")), LossWeights())
    with pytest.raises(NonFiniteComponent):
        total_loss(LossComponents(gra=float("inf")), LossWeights())


# --- illumination-robustness ordering (the testable robustness claim) ------------------

@pytest.mark.parametrize("scene_fn,seed", [
    (single_plane_scene, 21), (single_plane_scene, 22),
    (two_plane_scene, 23), (two_plane_scene, 24),
])
def test_robust_losses_grow_less_than_mae_under_illumination(scene_fn, seed):
    fx = ConvPyramidExtractor()
    spec = scene_fn(seed=seed, twist=[0.002, 0.004, 0.001, 0.15, 0.1, 0.1])
    img1, img2, *_ = render_scene_pair(spec)
    ill = IlluminationSpec(global_gain=1.1, global_bias=0.02,
                           field_seed=seed, field_amplitude=0.25)
    img2_lit = apply_illumination(img2, ill)

    def rel_increase(fn):
        clean = fn(img1, img2)
        lit = fn(img1, img2_lit)
        return (lit - clean) / max(clean, 1e-12)

    mae_growth = rel_increase(
        lambda a, b: float(np.abs(a.data - b.data).mean()))
    gra_growth = rel_increase(lambda a, b: gradient_loss(a, b))
    per_growth = rel_increase(lambda a, b: perceptual_loss(a, b, fx))
    assert gra_growth < mae_growth
    assert per_growth < mae_growth


def test_dimension_mismatch_raised_consistently(rng):
    a = ImageBuffer(rng.random((8, 8, 3)))
    b = ImageBuffer(rng.random((9, 8, 3)))
    with pytest.raises(DimensionMismatch):
        ssim_map(a, b)
    with pytest.raises(DimensionMismatch):
        haze_reconstruction_loss(a, b)
    with pytest.raises(DimensionMismatch):
        gradient_loss(a, b)
