"""Sweep of seed levels for invariant circles and regions of instability."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circles import CircleCandidate, DetectParams, classify_orbit, graph_eval

ON_CIRCLE_TOL = 1e-9


@dataclass
class RationalScan:
    Q: int
    irrational_up_to_Q: bool
    nearest: tuple  # (p, q)
    distance: float  # |omega - p/q|
    min_return: float  # min over q, k of |x_{k+q} - x_k - p| + |y_{k+q} - y_k|


@dataclass
class InstabilityBand:
    gamma_minus: CircleCandidate
    gamma_plus: CircleCandidate
    interior: list  # CircleCandidate of interior seeds
    scan_minus: RationalScan
    scan_plus: RationalScan
    Q: int
    width: float

    @property
    def omega_minus(self):
        return self.gamma_minus.rotation.value

    @property
    def omega_plus(self):
        return self.gamma_plus.rotation.value

    def report(self):
        return {
            "omega_minus": self.omega_minus,
            "omega_plus": self.omega_plus,
            "omega_minus_uncertainty": self.gamma_minus.rotation.uncertainty,
            "omega_plus_uncertainty": self.gamma_plus.rotation.uncertainty,
            "gamma_minus_seed": list(self.gamma_minus.seed),
            "gamma_plus_seed": list(self.gamma_plus.seed),
            "gamma_minus_samples": self.gamma_minus.samples.tolist(),
            "gamma_plus_samples": self.gamma_plus.samples.tolist(),
            "interior_verdicts": [
                {"seed": list(c.seed), "verdict": c.verdict,
                 "witness": None if c.witness is None else
                 [c.witness.i, c.witness.j, c.witness.m, c.witness.violation]}
                for c in self.interior],
            "irrational_up_to_Q": [self.scan_minus.irrational_up_to_Q, self.scan_plus.irrational_up_to_Q],
            "nearest_fraction": [list(self.scan_minus.nearest), list(self.scan_plus.nearest)],
            "Q": self.Q,
            "width": self.width,
        }

    def to_json(self):
        return json.dumps(self.report(), indent=1, sort_keys=True)


@dataclass
class AbsenceReport:
    reason: str
    candidates: list = field(default_factory=list)

    def report(self):
        counts = {}
        for c in self.candidates:
            counts[c.verdict] = counts.get(c.verdict, 0) + 1
        return {"band": None, "reason": self.reason, "verdict_counts": dict(sorted(counts.items()))}

    def to_json(self):
        return json.dumps(self.report(), indent=1, sort_keys=True)


def rational_scan(candidate, Q=50, tol=1e-8):
    """Look for periodic behaviour p/q, q <= Q, on a candidate circle."""
    omega = candidate.rotation.value
    unc = candidate.rotation.uncertainty
    x, y = candidate.orbit
    best = (math.inf, (0, 1))
    min_ret = math.inf
    hit = False
    for q in range(1, Q + 1):
        p = int(round(omega * q))
        dist = abs(omega - p / q)
        if dist < best[0]:
            best = (dist, (p, q))
        if q < x.size:
            ret = np.abs(x[q:] - x[:-q] - p) + np.abs(y[q:] - y[:-q])
            min_ret = min(min_ret, float(ret.min()))
            if ret.min() < tol:
                hit = True
        if dist <= max(unc, 1e-12):
            hit = True
    f = Fraction(*best[1])
    return RationalScan(Q, not hit, (f.numerator, f.denominator), float(best[0]), float(min_ret))


LEVEL_OFFSET = 0.5 * (math.sqrt(5.0) - 1.0)


def seed_grid(y_range, levels, seeds_per_level):
    """Levels lo + (k + g)(hi - lo)/levels with g the golden fraction, so that
    evenly spaced levels do not all sit on low-order rational rotations."""
    lo, hi = y_range
    ys = lo + (np.arange(levels) + LEVEL_OFFSET) * ((hi - lo) / levels)
    xs = (np.arange(seeds_per_level) + 0.5) / seeds_per_level
    X, Y = np.meshgrid(xs, ys)
    return X.ravel(), Y.ravel()


def classify_seeds(fmap, xs, ys, params=DetectParams()):
    X, Y = fmap.orbits(xs, ys, params.N)
    return [classify_orbit(X[k], Y[k], (float(xs[k]), float(ys[k])), params, fmap) for k in range(len(xs))]


def _on_or_between(c, lower, upper):
    x0, y0 = c.seed
    lo = float(graph_eval(lower.samples, x0)) if lower is not None else -math.inf
    hi = float(graph_eval(upper.samples, x0)) if upper is not None else math.inf
    return lo + ON_CIRCLE_TOL < y0 < hi - ON_CIRCLE_TOL


def select_band(candidates, Q=50):
    verified = sorted((c for c in candidates if c.verdict == "graph-verified"),
                      key=lambda c: (c.mean_y, c.seed))
    others = [c for c in candidates if c.verdict != "graph-verified"]
    grid = (np.arange(256) + 0.5) / 256
    best = None
    for lo, hi in zip(verified[:-1], verified[1:]):
        if not lo.rotation.value < hi.rotation.value:
            continue
        if any(_on_or_between(c, lo, hi) for c in verified if c is not lo and c is not hi):
            continue
        interior = [c for c in others if _on_or_between(c, lo, hi)]
        if not any(c.verdict == "refuted" for c in interior):
            continue
        width = float(np.mean(graph_eval(hi.samples, grid) - graph_eval(lo.samples, grid)))
        if best is None or width > best[0]:
            best = (width, lo, hi, interior)
    if best is None:
        reason = "no pair of graph-verified circles encloses a refuted seed"
        if len(verified) < 2:
            reason = f"fewer than two graph-verified circles ({len(verified)})"
        return AbsenceReport(reason, list(candidates))
    width, lo, hi, interior = best
    return InstabilityBand(lo, hi, interior, rational_scan(lo, Q), rational_scan(hi, Q), Q, width)


def instability_scan(fmap, y_range, levels=40, seeds_per_level=1, Q=50, params=DetectParams()):
    """Classify seeds on a grid of levels and return the widest band or an absence report."""
    lo, hi = y_range
    if levels <= 0 or seeds_per_level <= 0 or not hi > lo:
        return AbsenceReport("empty seed range")
    xs, ys = seed_grid(y_range, levels, seeds_per_level)
    return select_band(classify_seeds(fmap, xs, ys, params), Q)
