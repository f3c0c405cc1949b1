"""Self-supervised foggy-weather monocular VO core.

Submodules: types (pixel containers, intrinsics), se3 (pose algebra),
io (PNG/PFM/KITTI files), fog (scattering model + DCP estimators),
warp (view reconstruction), losses (the composite loss suite),
features (perceptual extractor / discriminator references), solver
(direct pose/depth optimization), metrics (depth errors + ATE),
scenes (synthetic ground-truth generation), config / records
(file formats), cli (command-line surface).
"""

from .errors import HazevoError
from .fog import (DcpConfig, FogParams, dark_channel, dehaze,
                  estimate_background_light, estimate_transmission_dcp,
                  synthesize_haze, transmission_from_depth)
from .losses import (LossComponents, LossWeights, SsimConfig,
                     appearance_loss, aux_transmission_loss, cycle_pose_loss,
                     gradient_loss, haze_reconstruction_loss,
                     lsgan_discriminator_loss, lsgan_generator_loss,
                     perceptual_loss, smoothness_loss, ssim_map,
                     total_gan_loss, total_loss)
from .metrics import (AteResult, DepthMetrics, ate, ate_windowed,
                      depth_metrics, pose_pair_error)
from .se3 import PoseSE3, compose, inverse, se3_exp, se3_log
from .solver import (ObjectiveOptions, SolveConfig, SolveResult,
                     numeric_gradient, objective, solve_cycled, solve_joint,
                     solve_pose)
from .types import CameraIntrinsics, DepthMap, ImageBuffer, TransmissionMap
from .warp import (ReconstructedView, WarpField, bilinear_sample,
                   reconstruct_view, warp_field)

__version__ = "0.1.0"

__all__ = [
    "HazevoError", "FogParams", "DcpConfig", "transmission_from_depth",
    "synthesize_haze", "dehaze", "dark_channel", "estimate_background_light",
    "estimate_transmission_dcp", "LossWeights", "LossComponents",
    "SsimConfig", "ssim_map", "appearance_loss", "smoothness_loss",
    "haze_reconstruction_loss", "aux_transmission_loss", "gradient_loss",
    "perceptual_loss", "lsgan_discriminator_loss", "lsgan_generator_loss",
    "total_gan_loss", "cycle_pose_loss", "total_loss", "DepthMetrics",
    "AteResult", "depth_metrics", "ate", "ate_windowed", "pose_pair_error",
    "PoseSE3", "se3_exp", "se3_log", "compose", "inverse",
    "SolveConfig", "SolveResult", "ObjectiveOptions", "numeric_gradient",
    "objective", "solve_pose", "solve_joint", "solve_cycled",
    "CameraIntrinsics", "DepthMap", "ImageBuffer", "TransmissionMap",
    "WarpField", "ReconstructedView", "warp_field", "bilinear_sample",
    "reconstruct_view",
]
