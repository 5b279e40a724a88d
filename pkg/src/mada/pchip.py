"""Shape-preserving piecewise cubic Hermite interpolation.

Derivative selection follows the Fritsch-Carlson construction in its
weighted-harmonic-mean form: interior slopes are zero wherever the data
changes direction, otherwise

    d_i = (w1 + w2) / (w1/delta_{i-1} + w2/delta_i),
    w1 = 2*h_i + h_{i-1},  w2 = h_i + 2*h_{i-1};

endpoint slopes use the one-sided three-point formula clamped to
preserve monotonicity near the boundary. The interpolant is C1 and
introduces no local extrema between knots.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np


class NonMonotoneKnots(ValueError):
    pass


class QueryOutOfRange(ValueError):
    pass


def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
    # One-sided three-point estimate, then the standard sign/magnitude clamps.
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if np.sign(d) != np.sign(d0):
        return 0.0
    if np.sign(d0) != np.sign(d1) and abs(d) > 3.0 * abs(d0):
        return 3.0 * d0
    return d


class PchipInterpolant:
    def __init__(self, knots: Sequence[float], values: Sequence[float]):
        y = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if y.ndim != 1 or y.shape != v.shape or y.size < 2:
            raise NonMonotoneKnots("need equally many knots and values, at least two")
        if not np.all(np.diff(y) > 0):
            raise NonMonotoneKnots("knots must be strictly increasing")
        self.knots = y
        self.values = v
        self.slopes = self._derivatives(y, v)

    @staticmethod
    def _derivatives(y: np.ndarray, v: np.ndarray) -> np.ndarray:
        n = y.size
        h = np.diff(y)
        delta = np.diff(v) / h
        d = np.zeros(n)
        if n == 2:
            d[:] = delta[0]
            return d
        for i in range(1, n - 1):
            if delta[i - 1] == 0.0 or delta[i] == 0.0 or np.sign(delta[i - 1]) != np.sign(delta[i]):
                d[i] = 0.0
            else:
                w1 = 2.0 * h[i] + h[i - 1]
                w2 = h[i] + 2.0 * h[i - 1]
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
        d[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
        d[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
        return d

    def __call__(self, query: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        q = np.asarray(query, dtype=float)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        y, v, d = self.knots, self.values, self.slopes
        if np.any(q < y[0]) or np.any(q > y[-1]):
            raise QueryOutOfRange(f"query outside [{y[0]}, {y[-1]}]")
        idx = np.clip(np.searchsorted(y, q, side="right") - 1, 0, y.size - 2)
        h = y[idx + 1] - y[idx]
        delta = (v[idx + 1] - v[idx]) / h
        # Local power basis (exact on constant data): value + slope, then
        # the two curvature coefficients of the Hermite cubic.
        c2 = (3.0 * delta - 2.0 * d[idx] - d[idx + 1]) / h
        c3 = (d[idx] + d[idx + 1] - 2.0 * delta) / (h * h)
        s = q - y[idx]
        out = v[idx] + s * (d[idx] + s * (c2 + s * c3))
        # Interior knot queries fall at s=0 and are exact; only the last
        # knot evaluates at s=h and needs pinning.
        out = np.where(q == y[-1], v[-1], out)
        return float(out[0]) if scalar else out


def pchip_interpolate(knots: Sequence[float], values: Sequence[float],
                      query: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return PchipInterpolant(knots, values)(query)
