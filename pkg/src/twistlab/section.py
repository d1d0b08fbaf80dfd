"""Sections of the geodesic flow transverse to a prime direction v.

Lifted section lines are <x, v> = i |v|^2, i.e. x = i v + b v_perp.  Points
of kind "V" carry unit tangent vectors (F = 1), points of kind "W" carry
vectors normalized by <w, v> = |v|^2, i.e. w = v + d v_perp.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .metric import IntegrationError, InvalidInput, metric_eval_arrays, status_text
from .reduction import NotAGraph, as_direction

GRAPH_EPS = 1e-8
EVENT_TOL = 1e-10


@dataclass(frozen=True)
class SectionPoint:
    kind: str
    index: int
    x: tuple
    w: tuple

    def __post_init__(self):
        if self.kind not in ("V", "W"):
            raise InvalidInput(f"unknown section kind {self.kind!r}")
        object.__setattr__(self, "index", int(self.index))
        object.__setattr__(self, "x", tuple(float(a) for a in self.x))
        object.__setattr__(self, "w", tuple(float(a) for a in self.w))

    def check(self, spec, v, tol=1e-9):
        """Raise if the point is off its section line or violates its kind."""
        d = as_direction(v)
        vv = np.array(d.v, dtype=float)
        x = np.array(self.x)
        w = np.array(self.w)
        if abs(x @ vv - self.index * d.norm2) > tol * max(1.0, d.norm2 * abs(self.index)):
            raise InvalidInput(f"x not on section line {self.index}")
        if self.kind == "V":
            F = metric_eval_arrays(spec, x, w)[0, 0]
            if abs(F - 1.0) > tol or w @ vv <= 0:
                raise InvalidInput(f"not a unit vector pointing along v (F = {F!r})")
        elif abs(w @ vv - d.norm2) > tol * d.norm2:
            raise InvalidInput("w is not of the form v + d v_perp")
        return self


def _wv(point, d):
    wv = point.w[0] * d.v[0] + point.w[1] * d.v[1]
    if wv <= 0:
        raise InvalidInput(f"<w, v> = {wv!r} <= 0")
    return wv


def scale_map(spec, v, point):
    """W -> V by w / F(x, w), V -> W by w |v|^2 / <v, w>."""
    d = as_direction(v)
    wv = _wv(point, d)
    w = np.array(point.w)
    if point.kind == "W":
        F = metric_eval_arrays(spec, point.x, w)[0, 0]
        return SectionPoint("V", point.index, point.x, tuple(w / F))
    return SectionPoint("W", point.index, point.x, tuple(w * (d.norm2 / wv)))


def chart(point, v, i=None):
    """(b, d) with x = i v + b v_perp, w = v + d v_perp."""
    d = as_direction(v)
    if point.kind != "W":
        raise InvalidInput("chart needs a W-kind point")
    if i is not None and int(i) != point.index:
        raise InvalidInput(f"point has index {point.index}, chart index {i}")
    p = d.perp
    return ((point.x[0] * p[0] + point.x[1] * p[1]) / d.norm2,
            (point.w[0] * p[0] + point.w[1] * p[1]) / d.norm2)


def chart_inverse(b, dd, i, v):
    d = as_direction(v)
    x = (i * d.v[0] + b * d.perp[0], i * d.v[1] + b * d.perp[1])
    w = (d.v[0] + dd * d.perp[0], d.v[1] + dd * d.perp[1])
    return SectionPoint("W", i, x, w)


def return_index(v):
    """Number of crossings of the projected section before the return: |v|^2."""
    return as_direction(v).norm2


@dataclass
class ReturnDiagnostics:
    crossings: int
    time: float
    event_residual: float
    min_wv: float
    steps: int


def _to_level(spec, d, y0, level, tol, max_steps):
    vdat = np.array([d.v[0], d.v[1], d.norm2, level], dtype=float)
    out = np.empty(4)
    info = np.zeros(6)
    st = K.geodesic_to_level(spec.modes, spec.coefs, vdat, np.asarray(y0, dtype=float),
                             tol, tol, max_steps, GRAPH_EPS, EVENT_TOL, out, info)
    return st, out, info


def return_map(spec, v, point, tol=1e-10, max_steps=10_000_000):
    """Lifted return map from section i to section i + 1 along the geodesic flow."""
    d = as_direction(v)
    if point.kind != "V":
        raise InvalidInput("return_map needs a V-kind (unit) point")
    _wv(point, d)
    level = (point.index + 1) * d.norm2
    st, out, info = _to_level(spec, d, point.x + point.w, level, tol, max_steps)
    if st == K.NOT_A_GRAPH:
        raise NotAGraph(f"<x', v> fell below {GRAPH_EPS} at geodesic time {info[2]!r}", time=info[2])
    if st != K.OK:
        raise IntegrationError(f"return map: {status_text(st)}", status=st)
    diag = ReturnDiagnostics(int(info[3]), float(info[2]), float(info[5]), float(info[4]), int(info[1]))
    return SectionPoint("V", point.index + 1, tuple(out[:2]), tuple(out[2:])), diag


def flat_return_closed_form(v, point):
    d = as_direction(v)
    wv = _wv(point, d)
    s = d.norm2 / wv
    return (point.x[0] + s * point.w[0], point.x[1] + s * point.w[1]), point.w


def section_return_W(spec, v, b, dd, tol=1e-10):
    """P_0 = g^-1 o R_0 o g in chart coordinates: (b, d) on W_0 -> (b', d') on W_1."""
    p0 = chart_inverse(b, dd, 0, v)
    p1, diag = return_map(spec, v, scale_map(spec, v, p0), tol=tol)
    return chart(scale_map(spec, v, p1), v, 1), diag


@dataclass
class ConjugacyReport:
    grid: int
    max_dev: float
    mean_dev: float
    excluded: int
    points: list  # (b, d, deviation or None)

    def to_json(self):
        return json.dumps({"grid": self.grid, "max_dev": self.max_dev, "mean_dev": self.mean_dev,
                           "excluded": self.excluded}, indent=2, sort_keys=True)


def conjugacy_check(spec, v, L_R, grid, tol=1e-10):
    """Compare l_1 o P_0 o l_0^-1 with the Euler-Lagrange time-1 map of L_R.

    ``grid`` is an iterable of chart points (b, d).  Points whose geodesic
    loses the graph property or whose EL orbit leaves |r| < R are excluded."""
    from .reduction import el_map

    pts = [(float(b), float(dd)) for b, dd in grid]
    if not pts:
        return ConjugacyReport(0, 0.0, 0.0, 0, [])
    R = getattr(L_R, "R", math.inf)
    bs = np.array([p[0] for p in pts])
    ds = np.array([p[1] for p in pts])
    X, Rr, maxr = el_map(L_R, bs, ds, 0.0, 1.0, tol=tol)
    devs = []
    for k, (b, dd) in enumerate(pts):
        if maxr[k] >= R:
            devs.append(None)
            continue
        try:
            (b1, d1), _ = section_return_W(spec, v, b, dd, tol=tol)
        except NotAGraph:
            devs.append(None)
            continue
        devs.append(max(abs(b1 - X[k]), abs(d1 - Rr[k])))
    good = [e for e in devs if e is not None]
    return ConjugacyReport(len(pts), float(max(good, default=0.0)),
                           float(np.mean(good)) if good else 0.0,
                           len(pts) - len(good), [(b, dd, e) for (b, dd), e in zip(pts, devs)])


def write_section_csv(path, points):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["kind", "index", "x1", "x2", "w1", "w2"])
        for p in points:
            wr.writerow([p.kind, p.index] + [repr(a) for a in p.x + p.w])
