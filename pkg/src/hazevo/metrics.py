"""Depth-error metrics and absolute trajectory error.

Depth metrics are the standard seven-column suite (abs rel, sq rel, RMSE,
RMSE log, and the three 1.25^k inlier ratios) over ground-truth pixels in
(0, cap], with optional median scaling for scale-ambiguous predictions.

ATE aligns the estimated trajectory to ground truth (none / rigid /
similarity, closed-form Umeyama) and reports mean +- std of per-frame
position errors.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateTrajectory, DimensionMismatch, LengthMismatch,
                     NoValidPixels, ValidationError)
from .se3 import PoseSE3, rotation_angle
from .types import DepthMap

PRED_FLOOR = 1e-3  # meters; keeps the log metric finite


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    n_valid: int
    cap: float

    def row(self):
        return (self.abs_rel, self.sq_rel, self.rmse, self.rmse_log,
                self.delta1, self.delta2, self.delta3)


def depth_metrics(pred: DepthMap, gt: DepthMap, cap: float = 50.0,
                  median_scale: bool = False) -> DepthMetrics:
    """Seven-column depth error suite over pixels with gt in (0, cap]."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionMismatch("depth_metrics: prediction/gt sizes differ")
    valid = gt.valid_mask() & (gt.data > 0) & (gt.data <= cap) & pred.valid_mask()
    if not valid.any():
        raise NoValidPixels("no ground-truth pixels in (0, cap]")
    g = gt.data[valid]
    p = pred.data[valid]
    if median_scale:
        p = p * (np.median(g) / np.median(p))
    p = np.clip(p, PRED_FLOOR, cap)
    ratio = np.maximum(p / g, g / p)
    diff = p - g
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff * diff / g)),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        n_valid=int(valid.sum()),
        cap=float(cap),
    )


@dataclass(frozen=True)
class AteResult:
    mean: float
    std: float
    per_frame_errors: tuple
    alignment: str

    def formatted(self):
        return f"{self.mean:.3f} ± {self.std:.3f}"


def umeyama_alignment(src, dst, with_scale: bool):
    """Closed-form similarity/rigid alignment minimizing
    sum ||s R src_i + t - dst_i||^2.  Returns (s, R, t)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    cov = xd.T @ xs / src.shape[0]
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2, 2] = -1.0
    rot = u @ s_fix @ vt
    if with_scale:
        var_s = (xs * xs).sum() / src.shape[0]
        if var_s < 1e-18:
            raise DegenerateTrajectory(
                "all estimated positions identical; scale is undefined")
        scale = float((d * np.diag(s_fix)).sum() / var_s)
    else:
        scale = 1.0
    t = mu_d - scale * rot @ mu_s
    return scale, rot, t


def ate(estimated, ground_truth, alignment: str = "similarity") -> AteResult:
    """Per-frame position error after optional trajectory alignment."""
    if alignment not in ("none", "rigid", "similarity"):
        raise ValidationError(f"unknown alignment '{alignment}'")
    if len(estimated) != len(ground_truth):
        raise LengthMismatch(
            f"{len(estimated)} estimated vs {len(ground_truth)} gt poses")
    if len(estimated) < 2:
        raise LengthMismatch("need at least 2 poses")
    est = np.array([p.translation for p in estimated])
    gt = np.array([p.translation for p in ground_truth])
    if alignment != "none":
        s, rot, t = umeyama_alignment(est, gt, alignment == "similarity")
        est = (s * (rot @ est.T)).T + t
    errors = np.linalg.norm(est - gt, axis=1)
    return AteResult(mean=float(errors.mean()), std=float(errors.std()),
                     per_frame_errors=tuple(float(e) for e in errors),
                     alignment=alignment)


def ate_windowed(estimated, ground_truth, window: int,
                 alignment: str = "similarity") -> AteResult:
    """ATE over consecutive snippets of ``window`` frames, each aligned
    independently; per-frame errors are pooled."""
    if window < 2:
        raise ValidationError("window must be >= 2")
    if len(estimated) != len(ground_truth):
        raise LengthMismatch(
            f"{len(estimated)} estimated vs {len(ground_truth)} gt poses")
    errors = []
    for start in range(0, len(estimated) - 1, window):
        chunk_e = estimated[start:start + window]
        chunk_g = ground_truth[start:start + window]
        if len(chunk_e) < 2:
            break
        errors.extend(ate(chunk_e, chunk_g, alignment).per_frame_errors)
    if not errors:
        raise LengthMismatch("trajectory shorter than one window")
    arr = np.asarray(errors)
    return AteResult(mean=float(arr.mean()), std=float(arr.std()),
                     per_frame_errors=tuple(errors),
                     alignment=f"{alignment}/window={window}")


def pose_pair_error(est: PoseSE3, gt: PoseSE3):
    """(rotation error deg, translation error m, translation direction
    error deg).  Direction error is NaN when either translation is below
    1e-9."""
    rel_rot = gt.rotation.T @ est.rotation
    rot_err = float(np.degrees(rotation_angle(rel_rot)))
    trans_err = float(np.linalg.norm(est.translation - gt.translation))
    ne = np.linalg.norm(est.translation)
    ng = np.linalg.norm(gt.translation)
    if ne > 1e-9 and ng > 1e-9:
        cosang = np.dot(est.translation, gt.translation) / (ne * ng)
        angle = float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    else:
        angle = float("nan")
    return rot_err, trans_err, angle
