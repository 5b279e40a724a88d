"""Random geometry model generator shared by the kernel and acceptance tests.

Builds scripts (so everything flows through the interpreter): a convex-ish
polygon surface, optional structured mesh on quads, plus a few stray
vertices and a chord curve that belongs to no surface.
"""

from __future__ import annotations

import math

import numpy as np


def random_model_script(rng: np.random.Generator) -> str:
    n_poly = int(rng.integers(3, 8))
    center = rng.uniform(-5.0, 5.0, size=2)
    radius = rng.uniform(0.5, 3.0)
    # Well-separated increasing angles keep the polygon simple.
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=n_poly))
    while np.min(np.diff(angles, append=angles[0] + 2 * math.pi)) < 0.15:
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=n_poly))
    lines = []
    for theta in angles:
        r = radius * float(rng.uniform(0.8, 1.2))
        x = float(center[0]) + r * math.cos(float(theta))
        y = float(center[1]) + r * math.sin(float(theta))
        lines.append(f"create vertex {x!r} {y!r}")
    for i in range(n_poly):
        lines.append(f"create curve {i + 1} {((i + 1) % n_poly) + 1}")
    lines.append("create surface " + " ".join(str(i + 1) for i in range(n_poly)))
    if n_poly == 4 and rng.random() < 0.7:
        lines.append(f"mesh surface 1 intervals {int(rng.integers(1, 6))}")
    for _ in range(int(rng.integers(0, 4))):
        x, y = (float(v) for v in rng.uniform(-8.0, 8.0, size=2))
        lines.append(f"create vertex {x!r} {y!r}")
    if n_poly >= 5 and rng.random() < 0.5:
        lines.append(f"create curve 1 {n_poly - 1}")
    return "\n".join(lines) + "\n"
