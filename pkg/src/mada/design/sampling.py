"""Latin hypercube sampling: one sample per stratum per dimension."""

from __future__ import annotations

import numpy as np

from .space import DesignSpace


def lhs_sample(space: DesignSpace, n: int, seed) -> list[list[float]]:
    """Draw n stratified samples.

    Dimension d is split into n equal strata; a seeded permutation assigns
    each sample to one stratum and a uniform offset places it inside, so
    every stratum holds exactly one sample.  Identical seeds give identical
    draws.  The seed may be an int or a sequence (for derived streams).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    points = np.empty((n, space.dim), dtype=float)
    for d in range(space.dim):
        strata = rng.permutation(n)
        offsets = rng.uniform(size=n)
        unit = (strata + offsets) / n
        points[:, d] = space.lower[d] + unit * (space.upper[d] - space.lower[d])
    return [[float(v) for v in row] for row in points]
