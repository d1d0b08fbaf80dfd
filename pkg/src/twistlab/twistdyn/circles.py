"""Invariant-circle detection from a single orbit.

An orbit on an invariant graph must have (i) a circular order of its
x-projections preserved by the map, and (ii) bounded slopes between
neighbours.  A pair of iterates breaking (i) refutes the graph property.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import OrbitEscape
from .rotation import RotationEstimate, rotation_from_orbit


@dataclass
class DetectParams:
    N: int = 4000
    density: float = 0.02  # max gap of x mod 1
    lipschitz_max: float = 50.0
    rotation_tol: float = 1e-6
    order_tol: float = 1e-9


@dataclass
class OrderWitness:
    """x_i + m < x_j while X_i + m > X_j (X = next iterate)."""

    i: int
    j: int
    m: int
    violation: float

    def reproduce(self, x):
        """Check the witness against lifted orbit positions ``x``."""
        i, j, m = self.i, self.j, self.m
        return bool(x[i] + m < x[j] and x[i + 1] + m > x[j + 1])


@dataclass
class CircleCandidate:
    seed: tuple
    rotation: RotationEstimate | None
    samples: np.ndarray  # (k, 2) sorted by x in [0, 1)
    lipschitz: float
    max_gap: float
    verdict: str  # graph-verified | indeterminate | refuted
    witness: OrderWitness | None = None
    note: str = ""
    orbit: tuple | None = field(default=None, repr=False)

    def graph(self, x):
        return graph_eval(self.samples, x)

    @property
    def mean_y(self):
        return float(np.mean(self.samples[:, 1]))


def graph_eval(samples, x):
    """Periodic piecewise-linear interpolation of sorted samples (xi, y)."""
    xi = samples[:, 0]
    y = samples[:, 1]
    xp = np.concatenate([xi[-1:] - 1.0, xi, xi[:1] + 1.0])
    yp = np.concatenate([y[-1:], y, y[:1]])
    return np.interp(np.mod(x, 1.0), xp, yp)


def graph_distance(samples, x, y):
    """Vertical distance |y - u(x mod 1)| to an interpolated graph."""
    return np.abs(np.asarray(y) - graph_eval(samples, x))


def order_check(x, tol):
    """Largest ordering violation of the lifted orbit x_0 .. x_N, or None."""
    x = np.asarray(x, dtype=float)
    base = x[:-1]
    fl = np.floor(base)
    xi = base - fl
    G = xi + np.diff(x)  # image of xi under the lift
    o = np.argsort(xi, kind="stable")
    dG = np.diff(G[o])
    k = int(np.argmin(dG)) if dG.size else 0
    worst = None
    if dG.size and dG[k] < -tol:
        i, j = int(o[k]), int(o[k + 1])
        worst = OrderWitness(i, j, int(fl[j] - fl[i]), float(-dG[k]))
    # wrap-around: last point and first point shifted by one
    a, b = int(o[-1]), int(o[0])
    wrap = G[a] - (G[b] + 1.0)
    if wrap > tol and (worst is None or wrap > worst.violation):
        worst = OrderWitness(a, b, int(fl[b] - fl[a] - 1), float(wrap))
    return worst


def classify_orbit(x, y, seed, params=DetectParams(), fmap=None):
    """Verdict for a precomputed lifted orbit x_0 .. x_N, y_0 .. y_N."""
    if fmap is not None:
        try:
            fmap.check_tube(y)
        except OrbitEscape as e:
            return CircleCandidate(tuple(seed), None, np.empty((0, 2)), np.inf, 1.0,
                                   "indeterminate", note=f"escaped tube at step {e.step}", orbit=(x, y))
    rot = rotation_from_orbit(x)
    xi = np.mod(x[:-1], 1.0)
    o = np.argsort(xi, kind="stable")
    samples = np.column_stack([xi[o], y[:-1][o]])
    gaps = np.diff(np.concatenate([samples[:, 0], samples[:1, 0] + 1.0]))
    dy = np.diff(np.concatenate([samples[:, 1], samples[:1, 1]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(gaps > 0, np.abs(dy) / gaps, np.where(dy == 0, 0.0, np.inf))
    lip = float(slopes.max())
    max_gap = float(gaps.max())
    w = order_check(x, params.order_tol)
    if w is not None:
        verdict, note = "refuted", "circular order not preserved"
    elif max_gap > params.density:
        verdict, note = "indeterminate", "orbit not dense"
    elif lip > params.lipschitz_max:
        verdict, note = "indeterminate", "slope bound exceeded"
    elif rot.uncertainty > params.rotation_tol:
        verdict, note = "indeterminate", "rotation estimate not converged"
    else:
        verdict, note = "graph-verified", ""
    return CircleCandidate(tuple(seed), rot, samples, lip, max_gap, verdict, w, note, (x, y))


def circle_detect(fmap, seed, params=DetectParams()):
    """Iterate ``seed`` params.N times and classify the orbit."""
    x, y = fmap.orbit(seed[0], seed[1], params.N)
    return classify_orbit(x, y, seed, params, fmap)
