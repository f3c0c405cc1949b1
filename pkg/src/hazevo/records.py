"""Line-delimited result records with stable field ordering.

One ``key = value`` per line (same value syntax as config files), keys in
a fixed documented order so records diff cleanly and byte-compare across
runs.  Wall-clock timings are deliberately *not* part of the default
record: every number in a record must be reproducible from config + seed,
and timings are not.  ``include_timings=True`` appends them at the end
for humans.
"""

import numpy as np

from .config import format_value
from .losses import LossWeights
from .metrics import AteResult, DepthMetrics

ARTIFACT_VERSION = "hazevo-0.1.0"


class RecordBuilder:
    """Ordered key-value accumulator rendering to the record text."""

    def __init__(self, kind: str):
        self.pairs = [("record.version", ARTIFACT_VERSION),
                      ("record.kind", kind)]

    def add(self, key: str, value):
        if isinstance(value, (np.floating, np.integer)):
            value = value.item()
        self.pairs.append((key, value))
        return self

    def add_floats(self, key: str, values):
        self.pairs.append(
            (key, " ".join(repr(float(v)) for v in np.asarray(values).flat)))
        return self

    def render(self) -> str:
        return "\n".join(f"{k} = {format_value(v)}"
                         for k, v in self.pairs) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.render())


def add_weights(builder: RecordBuilder, weights: LossWeights):
    builder.add("weights.alpha", weights.alpha)
    for name in ("p", "s", "gan", "cyc", "gra", "per"):
        builder.add(f"weights.lambda_{name}", getattr(weights, f"lambda_{name}"))
    return builder


def add_solve_config(builder: RecordBuilder, cfg):
    for name in cfg.FIELD_ORDER:
        builder.add(f"solve.{name}", getattr(cfg, name))
    add_weights(builder, cfg.weights)
    return builder


def add_pose(builder: RecordBuilder, key: str, pose):
    mat = np.hstack([pose.rotation, pose.translation[:, None]])
    builder.add_floats(key, mat.reshape(-1))
    return builder


def add_solve_result(builder: RecordBuilder, result, include_timings=False):
    add_pose(builder, "result.pose", result.pose)
    if result.pose_backward is not None:
        add_pose(builder, "result.pose_backward", result.pose_backward)
        builder.add("result.cycle_disagreement",
                    float(result.cycle_disagreement))
    builder.add("result.iterations", result.iterations)
    builder.add("result.converged", bool(result.converged))
    builder.add("result.coverage", float(result.coverage))
    builder.add("result.final_loss", float(result.final_loss))
    for name in ("p", "s", "gan", "cyc", "gra", "per"):
        builder.add(f"result.loss.{name}",
                    float(result.final_breakdown.get(name, 0.0)))
    builder.add("result.depth_median", float(np.median(result.depth.data)))
    if include_timings:
        builder.add("timing.wall_seconds", float(result.wall_time))
    return builder


def add_depth_metrics(builder: RecordBuilder, metrics: DepthMetrics,
                      prefix="depth_metrics"):
    builder.add(f"{prefix}.cap", metrics.cap)
    builder.add(f"{prefix}.n_valid", metrics.n_valid)
    for name in ("abs_rel", "sq_rel", "rmse", "rmse_log",
                 "delta1", "delta2", "delta3"):
        builder.add(f"{prefix}.{name}", float(getattr(metrics, name)))
    return builder


def add_ate(builder: RecordBuilder, result: AteResult, prefix="ate"):
    builder.add(f"{prefix}.alignment", result.alignment)
    builder.add(f"{prefix}.mean", float(result.mean))
    builder.add(f"{prefix}.std", float(result.std))
    builder.add(f"{prefix}.frames", len(result.per_frame_errors))
    return builder
