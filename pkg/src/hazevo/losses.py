"""The self-supervised loss suite, each term a pure scalar function.

Terms: appearance (SSIM + L1), edge-aware smoothness, haze reconstruction,
auxiliary transmission, least-squares GAN (over pluggable discriminator
scores), cycled pose consistency, gradient-magnitude, and perceptual
(over a pluggable feature extractor), combined by a weighted sum.

Matrix norms are size-normalized (Frobenius / sqrt(element count)) so every
value is resolution-independent.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, EmptyMask, ExtractorShapeMismatch,
                     NonFiniteComponent, ValidationError)
from .kernels import box_mean
from .se3 import PoseSE3, compose, inverse, se3_log
from .types import DepthMap, ImageBuffer, TransmissionMap
from .warp import ReconstructedView


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights: alpha blends SSIM vs L1 inside the appearance term;
    the lambdas weight the six terms of the total loss.

    The GAN weight defaults to 0 because no trained discriminator ships
    with the package; it participates once a user supplies one.
    """

    alpha: float = 0.85
    lambda_p: float = 1.0
    lambda_s: float = 0.1
    lambda_gan: float = 0.0
    lambda_cyc: float = 0.05
    lambda_gra: float = 0.5
    lambda_per: float = 0.05

    def __post_init__(self):
        vals = (self.alpha, self.lambda_p, self.lambda_s, self.lambda_gan,
                self.lambda_cyc, self.lambda_gra, self.lambda_per)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValidationError("loss weights must be finite and >= 0")
        if not 0 <= self.alpha <= 1:
            raise ValidationError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class SsimConfig:
    """Local-statistics window radius and stabilization constants for
    unit-range intensities."""

    window_radius: int = 1
    c1: float = 0.0001
    c2: float = 0.0009

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValidationError("SSIM constants must be positive")


def _same_size(a, b, what):
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch(
            f"{what}: {a.height}x{a.width} vs {b.height}x{b.width}")


def ssim_map(a: ImageBuffer, b: ImageBuffer,
             cfg: SsimConfig = SsimConfig()) -> ImageBuffer:
    """Per-pixel local SSIM in [-1, 1], channel-averaged to one plane.

    Local means/variances use a replicate-padded box filter.
    """
    _same_size(a, b, "ssim_map")
    if a.channels != b.channels:
        raise DimensionMismatch("ssim_map: channel counts differ")
    r = cfg.window_radius
    out = np.zeros((a.height, a.width), dtype=np.float64)
    for c in range(a.channels):
        x = a.plane(c)
        y = b.plane(c)
        mu_x = box_mean(x, r)
        mu_y = box_mean(y, r)
        sigma_x = box_mean(x * x, r) - mu_x * mu_x
        sigma_y = box_mean(y * y, r) - mu_y * mu_y
        sigma_xy = box_mean(x * y, r) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + cfg.c1) * (2.0 * sigma_xy + cfg.c2)
        den = (mu_x * mu_x + mu_y * mu_y + cfg.c1) * (sigma_x + sigma_y + cfg.c2)
        out += num / den
    return ImageBuffer(out / a.channels)


def appearance_loss(recon: ReconstructedView, target: ImageBuffer,
                    alpha: float = 0.85,
                    cfg: SsimConfig = SsimConfig()) -> float:
    """Pixel-level loss: mean over valid pixels of
    alpha*(1-SSIM)/2 + (1-alpha)*|recon - target|."""
    _same_size(recon.image, target, "appearance_loss")
    mask = recon.valid
    n = np.count_nonzero(mask)
    if n == 0:
        raise EmptyMask("appearance loss over an empty validity mask")
    l1 = np.abs(recon.image.data - target.data).mean(axis=2)
    dssim = (1.0 - ssim_map(recon.image, target, cfg).plane()) * 0.5
    per_pixel = alpha * dssim + (1.0 - alpha) * l1
    return float(per_pixel[mask].mean())


def smoothness_loss(depth: DepthMap, image: ImageBuffer) -> float:
    """Edge-aware depth smoothness: forward-difference depth gradients
    down-weighted by exp(-|image gradient|)."""
    if (depth.height, depth.width) != (image.height, image.width):
        raise DimensionMismatch("smoothness_loss: depth/image sizes differ")
    d = depth.data
    img = image.data.mean(axis=2)
    dx_d = np.abs(d[:, 1:] - d[:, :-1])
    dy_d = np.abs(d[1:, :] - d[:-1, :])
    dx_i = np.abs(img[:, 1:] - img[:, :-1])
    dy_i = np.abs(img[1:, :] - img[:-1, :])
    term_x = (dx_d * np.exp(-dx_i)).mean() if dx_d.size else 0.0
    term_y = (dy_d * np.exp(-dy_i)).mean() if dy_d.size else 0.0
    return float(term_x + term_y)


def _normalized_frobenius(diff) -> float:
    return float(np.sqrt(np.mean(diff * diff)))


def haze_reconstruction_loss(reconstructed: ImageBuffer,
                             original: ImageBuffer) -> float:
    """Size-normalized Frobenius distance between hazy images."""
    _same_size(reconstructed, original, "haze_reconstruction_loss")
    if reconstructed.channels != original.channels:
        raise DimensionMismatch("haze_reconstruction_loss: channels differ")
    return _normalized_frobenius(reconstructed.data - original.data)


def aux_transmission_loss(t_dec: TransmissionMap,
                          t_tra: TransmissionMap) -> float:
    """Size-normalized Frobenius distance between transmission maps."""
    _same_size(t_dec, t_tra, "aux_transmission_loss")
    return _normalized_frobenius(t_dec.data - t_tra.data)


def central_gradients(image: ImageBuffer):
    """Channel-averaged central-difference gradient (dx, dy); border rows
    and columns use the clamped-index one-sided difference.

    Each channel is differenced before averaging, so a global intensity
    offset cancels exactly (bitwise) rather than up to rounding.
    """
    img = image.data
    padded_x = np.pad(img, ((0, 0), (1, 1), (0, 0)), mode="edge")
    padded_y = np.pad(img, ((1, 1), (0, 0), (0, 0)), mode="edge")
    dx = ((padded_x[:, 2:] - padded_x[:, :-2]) * 0.5).mean(axis=2)
    dy = ((padded_y[2:, :] - padded_y[:-2, :]) * 0.5).mean(axis=2)
    return dx, dy


def gradient_loss(recon: ImageBuffer, target: ImageBuffer,
                  mask: np.ndarray | None = None) -> float:
    """Mean Euclidean distance between the per-pixel gradient vectors of
    the two images; exactly invariant to a global intensity offset."""
    _same_size(recon, target, "gradient_loss")
    gx_r, gy_r = central_gradients(recon)
    gx_t, gy_t = central_gradients(target)
    mag = np.sqrt((gx_r - gx_t) ** 2 + (gy_r - gy_t) ** 2)
    if mask is None:
        return float(mag.mean())
    n = np.count_nonzero(mask)
    if n == 0:
        raise EmptyMask("gradient loss over an empty validity mask")
    return float(mag[mask].mean())


def perceptual_loss(recon: ImageBuffer, target: ImageBuffer,
                    feature_extractor) -> float:
    """Feature-space squared distance, spatially averaged and summed over
    channels.  The extractor must be deterministic with a fixed output
    shape for a fixed input shape."""
    _same_size(recon, target, "perceptual_loss")
    f_r = np.asarray(feature_extractor(recon), dtype=np.float64)
    f_t = np.asarray(feature_extractor(target), dtype=np.float64)
    if f_r.shape != f_t.shape:
        raise ExtractorShapeMismatch(
            f"feature shapes differ: {f_r.shape} vs {f_t.shape}")
    if f_r.ndim != 3:
        raise ExtractorShapeMismatch("feature maps must be H x W x C")
    h, w = f_r.shape[:2]
    diff = f_r - f_t
    return float(np.sum(diff * diff) / (w * h))


def lsgan_discriminator_loss(real_score, fake_score) -> float:
    """Least-squares discriminator objective: (real-1)^2 + fake^2,
    batch-meaned per side."""
    real = np.asarray(real_score, dtype=np.float64)
    fake = np.asarray(fake_score, dtype=np.float64)
    return float(np.mean((real - 1.0) ** 2) + np.mean(fake ** 2))


def lsgan_generator_loss(fake_score) -> float:
    """Least-squares generator objective: (fake-1)^2, batch-meaned."""
    fake = np.asarray(fake_score, dtype=np.float64)
    return float(np.mean((fake - 1.0) ** 2))


def total_gan_loss(forward_scores, backward_scores) -> float:
    """Sum of generator and discriminator losses over both half-cycles;
    each argument is a (real_score, fake_score) pair."""
    total = 0.0
    for real, fake in (forward_scores, backward_scores):
        total += lsgan_discriminator_loss(real, fake)
        total += lsgan_generator_loss(fake)
    return float(total)


def cycle_pose_loss(p_f: PoseSE3, p_b: PoseSE3,
                    raw_difference: bool = False) -> float:
    """Consistency between the forward and backward pose estimates.

    Default: norm of the log of the relative pose, which is zero iff the
    poses are equal and independent of the chart.  ``raw_difference``
    switches to plain differencing of the two twist vectors.
    """
    if raw_difference:
        return float(np.linalg.norm(se3_log(p_f) - se3_log(p_b)))
    rel = compose(inverse(p_b), p_f)
    return float(np.linalg.norm(se3_log(rel)))


@dataclass(frozen=True)
class LossComponents:
    """Scalar values of the six weighted terms."""

    p: float = 0.0
    s: float = 0.0
    gan: float = 0.0
    cyc: float = 0.0
    gra: float = 0.0
    per: float = 0.0


_TERMS = ("p", "s", "gan", "cyc", "gra", "per")


def total_loss(components: LossComponents, weights: LossWeights):
    """Weighted combination; returns (total, per-term weighted breakdown)."""
    breakdown = {}
    total = 0.0
    for name in _TERMS:
        value = float(getattr(components, name))
        if not np.isfinite(value):
            raise NonFiniteComponent(f"loss component '{name}' is {value}")
        weighted = getattr(weights, f"lambda_{name}") * value
        breakdown[name] = weighted
        total += weighted
    return float(total), breakdown
