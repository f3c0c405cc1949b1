#!/usr/bin/env python3
"""Regenerate the committed golden files under tests/golden/.

Run from the repo root after any intentional change to the seeded
generators, then review the diff before committing.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

import numpy as np

from hazevo.io import write_image
from hazevo.scenes import IlluminationSpec, apply_illumination, render_scene_pair

from conftest import single_plane_scene

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "golden")


def main():
    os.makedirs(GOLDEN_DIR, exist_ok=True)
    img, *_ = render_scene_pair(single_plane_scene(seed=31))
    lit = apply_illumination(img, IlluminationSpec(
        global_gain=1.1, global_bias=0.02, field_seed=7,
        field_scale=20.0, field_amplitude=0.3))
    path = os.path.join(GOLDEN_DIR, "illumination_a0.3_seed7.png")
    write_image(lit, path)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
