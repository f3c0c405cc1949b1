"""Direct pose/depth recovery by minimizing the composite loss.

Where the original pipeline trains networks to regress pose and depth,
this solver minimizes the same loss directly per image pair over a
6-vector twist (plus, for the joint mode, a coarse log-depth control
grid), using central-difference gradients, heavy-ball momentum with a
backtracking line search (accepted steps strictly decrease the loss) and
a coarse-to-fine image pyramid.

Parameterization details that matter for reading results:

* internally the translation block of the twist is expressed in units of
  the median valid target depth, so rotation and translation gradients
  are comparable; poses returned in results are in meters;
* the joint mode returns depth median-normalized (median = 1) with the
  translation in the same scale, honoring the projective scale ambiguity;
* the forward/backward cycle estimates one and the same target->source
  pose from both half-cycles; the backward half consumes the forward
  reconstruction as its source image, exactly mirroring the closed loop.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Diverged, EmptyMask, NonFiniteObjective, ValidationError
from .features import ConvPyramidExtractor
from .losses import (LossComponents, LossWeights, SsimConfig,
                     appearance_loss, cycle_pose_loss, gradient_loss,
                     lsgan_discriminator_loss, lsgan_generator_loss,
                     perceptual_loss, smoothness_loss, total_loss)
from .se3 import PoseSE3, compose, inverse, se3_exp, se3_log
from .types import CameraIntrinsics, DepthMap, ImageBuffer
from .warp import ReconstructedView, bilinear_sample, reconstruct_view, warp_field

_TEXTURE_FLOOR = 1e-8   # mean |gradient| below this: no photometric signal
_CYCLE_COVERAGE_FLOOR = 0.3


@dataclass(frozen=True)
class SolveConfig:
    """Optimizer knobs; every field is recorded in result records."""

    max_iters: int = 300
    step_size: float = 1e-2
    momentum: float = 0.9
    convergence_tol: float = 1e-6
    convergence_window: int = 10
    fd_epsilon_twist: float = 1e-4
    fd_epsilon_depth: float = 1e-3
    depth_grid: int = 8
    pyramid_levels: int = 3
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    enable_cycle: bool = False
    enable_robust: bool = False
    max_halvings: int = 20
    cycle_refinements: int = 2
    joint_rounds: int = 6
    threads: int = 1

    def __post_init__(self):
        if self.max_iters < 1 or self.pyramid_levels < 1:
            raise ValidationError("max_iters and pyramid_levels must be >= 1")
        if self.step_size <= 0 or self.fd_epsilon_twist <= 0 \
                or self.fd_epsilon_depth <= 0:
            raise ValidationError("steps and epsilons must be positive")
        if self.depth_grid < 2:
            raise ValidationError("depth_grid must be >= 2")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must be in [0, 1)")

    FIELD_ORDER = ("max_iters", "step_size", "momentum", "convergence_tol",
                   "convergence_window", "fd_epsilon_twist",
                   "fd_epsilon_depth", "depth_grid", "pyramid_levels",
                   "seed", "enable_cycle", "enable_robust", "max_halvings",
                   "cycle_refinements", "joint_rounds", "threads")


@dataclass
class SolveResult:
    pose: PoseSE3
    pose_backward: PoseSE3 | None
    depth: DepthMap
    loss_trace: list
    iterations: int
    converged: bool
    coverage: float
    final_loss: float
    final_breakdown: dict
    cycle_disagreement: float | None = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class ObjectiveOptions:
    """Term gating for a single objective evaluation."""

    enable_robust: bool = False
    ssim: SsimConfig = field(default_factory=SsimConfig)
    discriminator: object = None
    feature_extractor: object = None
    include_smoothness: bool = True


def numeric_gradient(fn, params, eps):
    """Central-difference gradient of a scalar function.

    ``eps`` is a scalar or per-coordinate vector.  Raises
    NonFiniteObjective when any probe comes back non-finite.
    """
    x = np.asarray(params, dtype=np.float64)
    eps_vec = np.broadcast_to(np.asarray(eps, dtype=np.float64), x.shape)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = eps_vec.flat[i]
        xp = x.copy()
        xp.flat[i] += e
        xm = x.copy()
        xm.flat[i] -= e
        fp = fn(xp)
        fm = fn(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteObjective(
                f"objective non-finite near coordinate {i}")
        grad.flat[i] = (fp - fm) / (2.0 * e)
    return grad


def _numeric_gradient_threaded(fn, params, eps, pool):
    x = np.asarray(params, dtype=np.float64)
    eps_vec = np.broadcast_to(np.asarray(eps, dtype=np.float64), x.shape)
    probes = []
    for i in range(x.size):
        for sign in (1.0, -1.0):
            xp = x.copy()
            xp.flat[i] += sign * eps_vec.flat[i]
            probes.append(xp)
    values = list(pool.map(fn, probes))
    grad = np.empty_like(x)
    for i in range(x.size):
        fp, fm = values[2 * i], values[2 * i + 1]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteObjective(
                f"objective non-finite near coordinate {i}")
        grad.flat[i] = (fp - fm) / (2.0 * eps_vec.flat[i])
    return grad


def upsample_grid(grid, height, width):
    """Bilinearly upsample a KxK control grid to height x width, grid
    corners pinned to image corners."""
    k = grid.shape[0]
    gy = np.linspace(0.0, k - 1.0, height)
    gx = np.linspace(0.0, k - 1.0, width)
    y0 = np.minimum(np.floor(gy).astype(np.int64), k - 2)
    x0 = np.minimum(np.floor(gx).astype(np.int64), k - 2)
    fy = (gy - y0)[:, None]
    fx = (gx - x0)[None, :]
    g00 = grid[np.ix_(y0, x0)]
    g01 = grid[np.ix_(y0, x0 + 1)]
    g10 = grid[np.ix_(y0 + 1, x0)]
    g11 = grid[np.ix_(y0 + 1, x0 + 1)]
    top = g00 * (1.0 - fx) + g01 * fx
    bot = g10 * (1.0 - fx) + g11 * fx
    return top * (1.0 - fy) + bot * fy


def _downsample_image(img: ImageBuffer) -> ImageBuffer:
    d = img.data
    h2, w2 = d.shape[0] // 2, d.shape[1] // 2
    d = d[:h2 * 2, :w2 * 2]
    return ImageBuffer(d.reshape(h2, 2, w2, 2, d.shape[2]).mean(axis=(1, 3)))


def _downsample_depth(depth: DepthMap) -> DepthMap:
    d = depth.data
    h2, w2 = d.shape[0] // 2, d.shape[1] // 2
    blocks = d[:h2 * 2, :w2 * 2].reshape(h2, 2, w2, 2)
    mask = depth.valid_mask()[:h2 * 2, :w2 * 2].reshape(h2, 2, w2, 2)
    summed = (blocks * mask).sum(axis=(1, 3))
    counts = mask.sum(axis=(1, 3))
    valid = counts == 4
    data = np.where(valid, summed / np.maximum(counts, 1), 1.0)
    return DepthMap(data, valid if not valid.all() else None)


def _pyramid(images, depth, k, levels):
    """[(images..., depth, K)] from fine to coarse; stops early when the
    next level would fall below 16px."""
    out = [(*images, depth, k)]
    for _ in range(levels - 1):
        imgs, dep, kk = out[-1][:-2], out[-1][-2], out[-1][-1]
        h, w = dep.height, dep.width
        if min(h, w) < 32:
            break
        out.append((*[_downsample_image(im) for im in imgs],
                    _downsample_depth(dep), kk.scaled(0.5)))
    return out[::-1]


def _texture_floor(image: ImageBuffer) -> bool:
    from .losses import central_gradients

    gx, gy = central_gradients(image)
    return float(np.mean(np.abs(gx)) + np.mean(np.abs(gy))) < _TEXTURE_FLOOR


class _PairEvaluator:
    """Loss evaluation for one (source, target) pair at one pyramid level."""

    def __init__(self, source, target, k, weights, options):
        self.source = source
        self.target = target
        self.k = k
        self.weights = weights
        self.options = options
        self.extractor = None
        if options.enable_robust and weights.lambda_per > 0:
            self.extractor = (options.feature_extractor
                              or ConvPyramidExtractor())

    def components(self, recon: ReconstructedView, depth: DepthMap):
        if recon.coverage == 0.0:
            raise EmptyMask("reconstruction has no valid pixels")
        w = self.weights
        opts = self.options
        p = appearance_loss(recon, self.target, w.alpha, opts.ssim)
        s = smoothness_loss(depth, self.target) if opts.include_smoothness \
            else 0.0
        gra = per = gan = 0.0
        if opts.enable_robust and (w.lambda_gra > 0 or w.lambda_per > 0):
            filled = ImageBuffer(np.where(recon.valid[:, :, None],
                                          recon.image.data, self.target.data))
            if w.lambda_gra > 0:
                gra = gradient_loss(filled, self.target, recon.valid)
            if w.lambda_per > 0:
                per = perceptual_loss(filled, self.target, self.extractor)
        if opts.discriminator is not None and w.lambda_gan > 0:
            real = opts.discriminator(self.target)
            fake = opts.discriminator(recon.image)
            gan = (lsgan_discriminator_loss(real, fake)
                   + lsgan_generator_loss(fake))
        return LossComponents(p=p, s=s, gan=gan, gra=gra, per=per)

    def evaluate(self, pose: PoseSE3, depth: DepthMap):
        recon = reconstruct_view(self.source, depth, pose, self.k)
        comps = self.components(recon, depth)
        total, breakdown = total_loss(comps, self.weights)
        return total, breakdown, recon


def _minimize(fn, x0, cfg: SolveConfig, eps, max_iters, trace, level,
              pool=None, detail_fn=None):
    """Backtracking momentum descent; returns (x, f, stop_reason).

    stop_reason: 'tol' (relative-decrease criterion), 'stalled' (no
    accepted step), 'exhausted' (iteration budget).  ``detail_fn(x)``,
    when given, enriches each accepted trace entry (per-term values).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f_cur = fn(x)
    if not np.isfinite(f_cur):
        raise Diverged("objective not finite at the initial point")
    history = [f_cur]
    velocity = np.zeros_like(x)
    grad_fn = (lambda z: numeric_gradient(fn, z, eps)) if pool is None \
        else (lambda z: _numeric_gradient_threaded(fn, z, eps, pool))
    for _ in range(max_iters):
        try:
            grad = grad_fn(x)
        except NonFiniteObjective:
            return x, f_cur, "stalled"
        velocity = cfg.momentum * velocity + grad
        accepted = False
        for direction in (velocity, grad):
            scale = cfg.step_size
            for _ in range(cfg.max_halvings + 1):
                cand = x - scale * direction
                f_cand = fn(cand)
                if np.isfinite(f_cand) and f_cand < f_cur:
                    x = cand
                    f_cur = f_cand
                    accepted = True
                    break
                scale *= 0.5
            if accepted:
                break
            if direction is velocity and not np.array_equal(velocity, grad):
                velocity = grad.copy()  # momentum led uphill: reset
            else:
                break
        if not accepted:
            return x, f_cur, "stalled"
        history.append(f_cur)
        entry = {"level": level, "total": f_cur}
        if detail_fn is not None:
            entry.update(detail_fn(x))
        trace.append(entry)
        win = cfg.convergence_window
        if len(history) > win:
            drop = history[-win - 1] - history[-1]
            if drop <= cfg.convergence_tol * max(history[-win - 1], 1e-12):
                return x, f_cur, "tol"
    return x, f_cur, "exhausted"


def _make_pool(cfg):
    if cfg.threads > 1:
        return ThreadPoolExecutor(max_workers=cfg.threads)
    return None


def _solve_options(cfg: SolveConfig) -> ObjectiveOptions:
    extractor = None
    if cfg.enable_robust and cfg.weights.lambda_per > 0:
        extractor = ConvPyramidExtractor()
    return ObjectiveOptions(enable_robust=cfg.enable_robust,
                            feature_extractor=extractor)


def pose_objective(source: ImageBuffer, target: ImageBuffer,
                   depth: DepthMap, k: CameraIntrinsics,
                   weights: LossWeights = LossWeights(),
                   options: ObjectiveOptions = ObjectiveOptions()):
    """Closure twist -> total loss with the depth held fixed (the function
    solve_pose minimizes, in unscaled twist coordinates).  Out-of-overlap
    poses evaluate to +inf."""
    ev = _PairEvaluator(source, target, k, weights, options)

    def fn(twist):
        try:
            return ev.evaluate(se3_exp(twist), depth)[0]
        except EmptyMask:
            return np.inf

    return fn


def objective(source: ImageBuffer, target: ImageBuffer, twist,
              log_depth_grid, k: CameraIntrinsics,
              weights: LossWeights = LossWeights(),
              options: ObjectiveOptions = ObjectiveOptions()):
    """Full composite loss of a (twist, log-depth grid) parameter point.

    The grid is bilinearly upsampled and exponentiated into a depth map;
    the target is reconstructed from the source through Eq.-style
    projection; enabled loss terms are combined by the weights.
    Returns (total, weighted breakdown dict).
    """
    grid = np.asarray(log_depth_grid, dtype=np.float64)
    depth = DepthMap(np.exp(upsample_grid(grid, target.height, target.width)))
    ev = _PairEvaluator(source, target, k, weights, options)
    total, breakdown, _ = ev.evaluate(se3_exp(twist), depth)
    return total, breakdown


def solve_pose(source: ImageBuffer, target: ImageBuffer, depth: DepthMap,
               k: CameraIntrinsics, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Recover the target->source pose with the depth held fixed.

    Coarse-to-fine over the pyramid; translation internally scaled by the
    median valid depth.  Raises Diverged when no pyramid level yields a
    valid overlap at initialization.
    """
    t0 = time.perf_counter()
    if (source.height, source.width) != (target.height, target.width):
        raise ValidationError("solve_pose: image sizes differ")
    opts = _solve_options(cfg)
    t_scale = float(np.median(depth.data[depth.valid_mask()]))
    trace = []
    xi = np.zeros(6)
    pool = _make_pool(cfg)
    stop = "stalled"
    textureless = _texture_floor(target)
    levels = _pyramid((source, target), depth, k, cfg.pyramid_levels)
    try:
        for li, (src_l, tgt_l, dep_l, k_l) in enumerate(levels):
            ev = _PairEvaluator(src_l, tgt_l, k_l, cfg.weights, opts)

            def fn(z):
                try:
                    return ev.evaluate(_scaled_exp(z, t_scale), dep_l)[0]
                except EmptyMask:
                    return np.inf

            def detail(z):
                try:
                    return ev.evaluate(_scaled_exp(z, t_scale), dep_l)[1]
                except EmptyMask:
                    return {}

            f0 = fn(xi)
            if not np.isfinite(f0):
                raise Diverged(
                    f"no valid overlap at pyramid level {li} initialization")
            trace.append({"level": li, "total": f0})
            if textureless:
                stop = "textureless"
                continue
            xi, _, stop = _minimize(fn, xi, cfg, cfg.fd_epsilon_twist,
                                    cfg.max_iters, trace, li, pool,
                                    detail_fn=detail)
    finally:
        if pool is not None:
            pool.shutdown()
    pose = _scaled_exp(xi, t_scale)
    ev = _PairEvaluator(source, target, k, cfg.weights, opts)
    total, breakdown, recon = ev.evaluate(pose, depth)
    converged = stop in ("tol", "stalled") and not textureless
    return SolveResult(
        pose=pose, pose_backward=None, depth=depth,
        loss_trace=trace, iterations=sum(1 for t in trace if "total" in t),
        converged=converged, coverage=recon.coverage, final_loss=total,
        final_breakdown=breakdown, wall_time=time.perf_counter() - t0)


def _scaled_exp(xi, t_scale) -> PoseSE3:
    twist = np.concatenate([xi[:3], xi[3:] * t_scale])
    return se3_exp(twist)


def solve_joint(source: ImageBuffer, target: ImageBuffer,
                k: CameraIntrinsics, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Alternate twist and log-depth-grid blocks until joint convergence.

    The returned depth is median-normalized (median exactly 1) and the
    pose translation is divided by the same factor, honoring the scale
    ambiguity of monocular reconstruction.
    """
    t0 = time.perf_counter()
    if (source.height, source.width) != (target.height, target.width):
        raise ValidationError("solve_joint: image sizes differ")
    opts = _solve_options(cfg)
    xi = np.zeros(6)
    grid = np.zeros((cfg.depth_grid, cfg.depth_grid))
    trace = []
    pool = _make_pool(cfg)
    textureless = _texture_floor(target)
    placeholder = DepthMap(np.ones((target.height, target.width)))
    levels = _pyramid((source, target), placeholder, k, cfg.pyramid_levels)
    stop = "stalled"
    block_iters = max(10, cfg.max_iters // (2 * cfg.joint_rounds))
    try:
        for li, (src_l, tgt_l, _dep, k_l) in enumerate(levels):
            ev = _PairEvaluator(src_l, tgt_l, k_l, cfg.weights, opts)
            h, w = tgt_l.height, tgt_l.width

            def eval_params(z_xi, z_grid):
                depth = DepthMap(np.exp(upsample_grid(z_grid, h, w)))
                try:
                    return ev.evaluate(se3_exp(z_xi), depth)[0]
                except EmptyMask:
                    return np.inf

            f0 = eval_params(xi, grid)
            if not np.isfinite(f0):
                raise Diverged(
                    f"no valid overlap at pyramid level {li} initialization")
            trace.append({"level": li, "total": f0})
            if textureless:
                stop = "textureless"
                continue
            f_round = f0
            for _ in range(cfg.joint_rounds):
                xi, _, stop = _minimize(
                    lambda z: eval_params(z, grid), xi, cfg,
                    cfg.fd_epsilon_twist, block_iters, trace, li, pool)
                flat = grid.reshape(-1)
                flat, f_new, stop_g = _minimize(
                    lambda z: eval_params(xi, z.reshape(grid.shape)), flat,
                    cfg, cfg.fd_epsilon_depth, block_iters, trace, li, pool)
                grid = flat.reshape(grid.shape)
                if f_round - f_new <= cfg.convergence_tol * max(f_round, 1e-12):
                    stop = "tol"
                    break
                f_round = f_new
    finally:
        if pool is not None:
            pool.shutdown()

    depth_full = np.exp(upsample_grid(grid, target.height, target.width))
    med = float(np.median(depth_full))
    depth_map = DepthMap(depth_full / med)
    pose_raw = se3_exp(xi)
    pose = PoseSE3(pose_raw.rotation, pose_raw.translation / med,
                   validate=False)
    ev = _PairEvaluator(source, target, k, cfg.weights, opts)
    total, breakdown, recon = ev.evaluate(pose, depth_map)
    converged = stop in ("tol", "stalled") and not textureless
    return SolveResult(
        pose=pose, pose_backward=None, depth=depth_map, loss_trace=trace,
        iterations=sum(1 for t in trace if "total" in t), converged=converged,
        coverage=recon.coverage, final_loss=total, final_breakdown=breakdown,
        wall_time=time.perf_counter() - t0)


class _BackwardEvaluator:
    """Backward half-cycle: reconstruct the current frame from the
    *synthesized* previous frame; the estimated parameter is still the
    previous->current pose (the warp uses its inverse), so both halves
    estimate the same quantity and the consistency loss is literal."""

    def __init__(self, synth_prev: ReconstructedView, current: ImageBuffer,
                 depth_current: DepthMap, k, weights, options):
        self.synth = synth_prev.image
        self.synth_valid = ImageBuffer(
            synth_prev.valid.astype(np.float64)[:, :, None])
        self.current = current
        self.depth = depth_current
        self.k = k
        self.ev = _PairEvaluator(self.synth, current, k, weights, options)

    def evaluate(self, pose_fwd: PoseSE3):
        field = warp_field(self.depth, inverse(pose_fwd), self.k, self.k,
                           self.synth.width, self.synth.height)
        recon = bilinear_sample(self.synth, field)
        mask_cover = bilinear_sample(self.synth_valid, field)
        valid = recon.valid & (mask_cover.image.plane() > 0.999)
        if not valid.any():
            raise EmptyMask("backward reconstruction has no valid pixels")
        recon = ReconstructedView(recon.image, valid,
                                  float(valid.mean()))
        comps = self.ev.components(recon, self.depth)
        return total_loss(comps, self.ev.weights)[0]


def solve_cycled(previous: ImageBuffer, current: ImageBuffer,
                 k: CameraIntrinsics, cfg: SolveConfig,
                 depth_previous: DepthMap, depth_current: DepthMap) -> SolveResult:
    """Forward/backward half-cycle estimation with pose-consistency
    coupling (enable_cycle must be set).

    With lambda_cyc = 0 the halves decouple and the forward estimate is
    exactly ``solve_pose``'s.
    """
    t0 = time.perf_counter()
    if not cfg.enable_cycle:
        raise ValidationError("solve_cycled requires enable_cycle=true")
    lam = cfg.weights.lambda_cyc
    forward = solve_pose(current, previous, depth_previous, k, cfg)
    t_scale = float(np.median(depth_previous.data[depth_previous.valid_mask()]))
    xi_f = se3_log(forward.pose)
    xi_f[3:] /= t_scale  # scaled parameterization, as in solve_pose

    opts = _solve_options(cfg)
    fwd_ev = _PairEvaluator(current, previous, k, cfg.weights, opts)
    trace = list(forward.loss_trace)
    pool = _make_pool(cfg)
    refine_iters = max(10, cfg.max_iters // 4)

    def forward_recon(xi):
        return reconstruct_view(current, depth_previous,
                                _scaled_exp(xi, t_scale), k)

    def backward_solveonce(xi_b0, synth, cycle_anchor):
        bev = _BackwardEvaluator(synth, current, depth_current, k,
                                 cfg.weights, opts)

        def fn(z):
            try:
                value = bev.evaluate(_scaled_exp(z, t_scale))
            except EmptyMask:
                return np.inf
            if lam > 0 and synth.coverage >= _CYCLE_COVERAGE_FLOOR:
                value += lam * cycle_pose_loss(cycle_anchor,
                                               _scaled_exp(z, t_scale))
            return value

        xb, _, _ = _minimize(fn, xi_b0, cfg, cfg.fd_epsilon_twist,
                             refine_iters, trace, "backward", pool)
        return xb

    try:
        synth = forward_recon(xi_f)
        xi_b = backward_solveonce(xi_f.copy(), synth,
                                  _scaled_exp(xi_f, t_scale))

        if lam > 0:
            for _ in range(cfg.cycle_refinements):
                anchor_b = _scaled_exp(xi_b, t_scale)

                def fn_f(z):
                    try:
                        total, _, recon = fwd_ev.evaluate(
                            _scaled_exp(z, t_scale), depth_previous)
                    except EmptyMask:
                        return np.inf
                    if recon.coverage >= _CYCLE_COVERAGE_FLOOR:
                        total += lam * cycle_pose_loss(
                            _scaled_exp(z, t_scale), anchor_b)
                    return total

                xi_f, _, _ = _minimize(fn_f, xi_f, cfg,
                                       cfg.fd_epsilon_twist, refine_iters,
                                       trace, "forward-cycle", pool)
                synth = forward_recon(xi_f)
                xi_b = backward_solveonce(xi_b, synth,
                                          _scaled_exp(xi_f, t_scale))
    finally:
        if pool is not None:
            pool.shutdown()

    pose_f = _scaled_exp(xi_f, t_scale)
    pose_b = _scaled_exp(xi_b, t_scale)
    disagreement = cycle_pose_loss(pose_f, pose_b)
    total, breakdown, recon = fwd_ev.evaluate(pose_f, depth_previous)
    return SolveResult(
        pose=pose_f, pose_backward=pose_b, depth=depth_previous,
        loss_trace=trace, iterations=sum(1 for t in trace if "total" in t),
        converged=forward.converged, coverage=recon.coverage,
        final_loss=total, final_breakdown=breakdown,
        cycle_disagreement=disagreement,
        wall_time=time.perf_counter() - t0)
