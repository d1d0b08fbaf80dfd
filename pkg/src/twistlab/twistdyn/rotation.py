"""Rotation numbers of lifted orbits by weighted Birkhoff averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import OrbitEscape


@dataclass
class RotationEstimate:
    value: float
    uncertainty: float
    N: int
    method: str
    partial: bool = False


def bump_weights(N):
    """Normalized weights exp(-1/(s(1-s))) at s = (k + 1/2)/N."""
    s = (np.arange(N) + 0.5) / N
    w = np.exp(-1.0 / (s * (1.0 - s)))
    return w / w.sum()


def weighted_average(d):
    d = np.asarray(d, dtype=float)
    return float(bump_weights(d.size) @ d)


def rotation_from_orbit(x, method="weighted"):
    """Estimate from lifted positions x_0 .. x_N."""
    d = np.diff(np.asarray(x, dtype=float))
    N = d.size
    if N < 2:
        raise ValueError("need at least two steps")
    avg = weighted_average if method == "weighted" else (lambda a: float(np.mean(a)))
    full = avg(d)
    half = avg(d[: N // 2])
    return RotationEstimate(full, abs(full - half), N, method)


def rotation_number(fmap, seed, N, method="weighted"):
    """Rotation number of the orbit of ``seed`` under the lifted map."""
    if N < 2:
        raise ValueError("N must be at least 2")
    x, y = fmap.orbit(seed[0], seed[1], N)
    try:
        fmap.check_tube(y)
    except OrbitEscape as e:
        k = max(e.step, 3)
        est = rotation_from_orbit(x[:k], method)
        est.partial = True
        return est
    return rotation_from_orbit(x, method)
