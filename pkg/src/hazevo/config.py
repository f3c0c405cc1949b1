"""Flat key-value configuration files with section headers.

Grammar (documented in the README):

* ``# ...`` comments and blank lines are ignored;
* ``[section]`` opens a section (``[plane.0]``, ``[plane.1]`` ... for
  repeated entries);
* ``key = value`` assigns within the current section;
* values are typed by shape: ``true``/``false`` -> bool, integer literal ->
  int, float literal -> float, anything else -> string (multi-number
  strings like ``"0 0 0.01 0.1 0 0"`` stay strings and are split by the
  consumer).
"""

import numpy as np

from .errors import ConfigError
from .fog import FogParams
from .scenes import IlluminationSpec, PlaneSpec, SceneSpec, TextureSpec
from .se3 import se3_exp
from .types import CameraIntrinsics


def _parse_value(raw: str):
    low = raw.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config(text: str) -> dict:
    """Parse config text into {section: {key: typed value}}."""
    sections: dict = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current = sections.setdefault(name, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if current is None:
            raise ConfigError(f"line {lineno}: assignment before any section")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        current[key] = _parse_value(raw.strip())
    return sections


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(sections: dict) -> str:
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            lines.append(f"{key} = {format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def read_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None


def _floats(raw, n, what):
    parts = str(raw).split()
    if len(parts) != n:
        raise ConfigError(f"{what}: expected {n} numbers, got {raw!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{what}: non-numeric entry in {raw!r}") from None


def fog_from_section(body: dict) -> FogParams:
    airlight = body.get("airlight", 0.9)
    if isinstance(airlight, str):
        airlight = _floats(airlight, 3, "fog.airlight")
    return FogParams(airlight, float(body.get("beta", 0.02)))


def scene_from_config(sections: dict) -> SceneSpec:
    """Build a SceneSpec from [scene] + [plane.N] (+ [illumination], [fog])
    sections."""
    if "scene" not in sections:
        raise ConfigError("missing [scene] section")
    sc = sections["scene"]
    try:
        width = int(sc["width"])
        height = int(sc["height"])
    except KeyError as e:
        raise ConfigError(f"[scene] missing {e}") from None
    fx = float(sc.get("fx", max(width, height)))
    fy = float(sc.get("fy", fx))
    cx = float(sc.get("cx", (width - 1) / 2.0))
    cy = float(sc.get("cy", (height - 1) / 2.0))
    intr = CameraIntrinsics(fx, fy, cx, cy)
    pose_raw = sc.get("pose", "0 0 0 0 0 0")
    if not isinstance(pose_raw, str):
        raise ConfigError("scene.pose must be 6 numbers 'wx wy wz tx ty tz'")
    pose = se3_exp(np.array(_floats(pose_raw, 6, "scene.pose")))

    planes = []
    for i in range(64):
        name = f"plane.{i}"
        if name not in sections:
            break
        body = sections[name]
        tex = TextureSpec(
            seed=int(body.get("seed", i + 1)),
            octaves=int(body.get("octaves", 3)),
            contrast=float(body.get("contrast", 0.8)),
            base_scale=float(body.get("base_scale", 16.0)),
            dark_dot_spacing=(float(body["dark_dot_spacing"])
                              if "dark_dot_spacing" in body else None),
            dark_dot_radius=float(body.get("dark_dot_radius", 1.2)),
        )
        region = None
        if "region" in body:
            region = tuple(_floats(body["region"], 4, f"{name}.region"))
        planes.append(PlaneSpec(depth=float(body["depth"]), texture=tex,
                                region=region))
    if not planes:
        raise ConfigError("scene needs at least a [plane.0] section")

    illumination = None
    if "illumination" in sections:
        il = sections["illumination"]
        illumination = IlluminationSpec(
            global_gain=float(il.get("gain", 1.0)),
            global_bias=float(il.get("bias", 0.0)),
            field_seed=int(il.get("seed", 0)),
            field_scale=float(il.get("scale", 24.0)),
            field_amplitude=float(il.get("amplitude", 0.0)),
        )

    fog = fog_from_section(sections["fog"]) if "fog" in sections else None
    return SceneSpec(width, height, intr, tuple(planes), pose,
                     illumination, fog)
