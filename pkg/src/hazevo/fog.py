"""Atmospheric scattering model and its inversions.

Hazy image formation: I = J*t + A*(1 - t) with t = exp(-beta * d).
Includes the dark-channel-prior estimators for background light A and a
coarse transmission map (the auxiliary supervision target).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, InvalidAirlight, InvalidDepth,
                     ValidationError)
from .kernels import min_filter
from .types import DepthMap, ImageBuffer, TransmissionMap


@dataclass(frozen=True)
class FogParams:
    """Background light A (scalar or RGB, each channel in (0,1]) and
    attenuation coefficient beta in 1/m."""

    background_light: tuple
    beta: float

    def __init__(self, background_light, beta):
        a = np.atleast_1d(np.asarray(background_light, dtype=np.float64))
        if a.size == 1:
            a = np.repeat(a, 3)
        if a.shape != (3,):
            raise ValidationError("background light must be scalar or 3-vector")
        if not np.all((a > 0) & (a <= 1)):
            raise ValidationError("background light channels must be in (0, 1]")
        if not (np.isfinite(beta) and beta >= 0):
            raise ValidationError("beta must be finite and >= 0")
        object.__setattr__(self, "background_light", tuple(float(x) for x in a))
        object.__setattr__(self, "beta", float(beta))

    def airlight(self):
        return np.array(self.background_light, dtype=np.float64)


@dataclass(frozen=True)
class DcpConfig:
    """Dark-channel-prior parameters (defaults are the classic published
    settings: 15x15 patch, omega 0.95, top 0.1% airlight pool, t floor 0.1)."""

    patch_radius: int = 7
    omega: float = 0.95
    airlight_fraction: float = 0.001
    t_floor: float = 0.1

    def __post_init__(self):
        if self.patch_radius < 0:
            raise ValidationError("patch_radius must be >= 0")
        if not 0 < self.omega <= 1:
            raise ValidationError("omega must be in (0, 1]")
        if not 0 < self.airlight_fraction <= 1:
            raise ValidationError("airlight_fraction must be in (0, 1]")
        if not 0 < self.t_floor < 1:
            raise ValidationError("t_floor must be in (0, 1)")


def transmission_from_depth(depth: DepthMap, beta: float,
                            cfg: DcpConfig | None = None) -> TransmissionMap:
    """t = exp(-beta * d); clamped below at cfg.t_floor only when a config
    is supplied (synthesis wants the unclamped physical value)."""
    if beta < 0 or not np.isfinite(beta):
        raise ValidationError("beta must be finite and >= 0")
    if depth.valid is not None and not depth.valid.all():
        raise InvalidDepth("transmission needs a fully valid depth map")
    t = np.exp(-beta * depth.data)
    if cfg is not None:
        t = np.maximum(t, cfg.t_floor)
    return TransmissionMap(t)


def _check_same_size(a, b, what):
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch(
            f"{what}: {a.height}x{a.width} vs {b.height}x{b.width}")


def synthesize_haze(clear: ImageBuffer, t: TransmissionMap,
                    fog: FogParams) -> ImageBuffer:
    """Compose a hazy image: I = J*t + A*(1-t), clamped to [0,1]."""
    _check_same_size(clear, t, "synthesize_haze")
    a = fog.airlight()[:clear.channels] if clear.channels == 3 \
        else np.array([np.mean(fog.airlight())])
    tt = t.data[:, :, None]
    hazy = clear.data * tt + a[None, None, :] * (1.0 - tt)
    return ImageBuffer(np.clip(hazy, 0.0, 1.0))


def dehaze(hazy: ImageBuffer, t: TransmissionMap, fog: FogParams,
           t_floor: float = 0.1) -> ImageBuffer:
    """Invert the scattering model: J = (I - A)/max(t, t_floor) + A."""
    _check_same_size(hazy, t, "dehaze")
    a = fog.airlight()[:hazy.channels] if hazy.channels == 3 \
        else np.array([np.mean(fog.airlight())])
    tt = np.maximum(t.data, t_floor)[:, :, None]
    clear = (hazy.data - a[None, None, :]) / tt + a[None, None, :]
    return ImageBuffer(np.clip(clear, 0.0, 1.0))


def dark_channel(image: ImageBuffer, patch_radius: int = 7) -> ImageBuffer:
    """Min over channels, then min over the (2r+1)^2 patch
    (border-replicated)."""
    if image.channels != 3:
        raise DimensionMismatch("dark channel requires a 3-channel image")
    min_c = image.data.min(axis=2)
    return ImageBuffer(min_filter(min_c, patch_radius))


def estimate_background_light(hazy: ImageBuffer, cfg: DcpConfig = DcpConfig()):
    """Pick A from the brightest pixel (by intensity sum) among the
    airlight_fraction brightest dark-channel pixels; row-major tie-break."""
    if hazy.channels != 3:
        raise DimensionMismatch("background light needs a 3-channel image")
    dark = dark_channel(hazy, cfg.patch_radius).plane().reshape(-1)
    n = max(1, int(np.floor(dark.size * cfg.airlight_fraction)))
    # stable sort keeps row-major order among equal dark-channel values
    order = np.argsort(-dark, kind="stable")[:n]
    sums = hazy.data.reshape(-1, 3).sum(axis=1)
    best = order[np.argmax(sums[order])]  # argmax returns first max: row-major
    return hazy.data.reshape(-1, 3)[best].copy()


def estimate_transmission_dcp(hazy: ImageBuffer, background_light,
                              cfg: DcpConfig = DcpConfig()) -> TransmissionMap:
    """Coarse transmission: t = 1 - omega * dark_channel(I/A), clamped to
    [t_floor, 1]."""
    a = np.atleast_1d(np.asarray(background_light, dtype=np.float64))
    if a.size == 1:
        a = np.repeat(a, 3)
    if np.any(a <= 0):
        raise InvalidAirlight("every background-light channel must be > 0")
    if hazy.channels != 3:
        raise DimensionMismatch("DCP transmission needs a 3-channel image")
    normalized = ImageBuffer(hazy.data / a[None, None, :])
    dark = dark_channel(normalized, cfg.patch_radius).plane()
    t = 1.0 - cfg.omega * dark
    return TransmissionMap(np.clip(t, cfg.t_floor, 1.0))
