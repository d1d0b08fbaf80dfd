"""Turn a cylinder orbit of the time-1 map back into a geodesic on the torus."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import _kernels as K
from ..metric import IntegrationError, TangentState, geodesic_flow, metric_eval_arrays, status_text
from ..reduction import GraphCurve, NotAGraph, as_direction, geodesic_residual, geodesic_to_graph
from .circles import graph_eval


@dataclass
class GeodesicTrack:
    t: np.ndarray  # graph parameter
    position: np.ndarray
    velocity: np.ndarray  # t v + theta' v_perp derivative, i.e. v + r v_perp
    unit: np.ndarray  # velocity / F
    max_abs_r: float
    el_residual: float  # max geodesic Euler-Lagrange residual on the samples
    joint_mismatch: float  # max jump between consecutive unit-time pieces
    dist_plus: float | None
    dist_minus: float | None
    F_drift: float  # drift of F along an independent geodesic integration
    geodesic_deviation: float  # graph deviation of that integration from the track

    def to_csv(self, path):
        F = np.ones(self.t.size)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x1", "x2", "w1", "w2", "F"])
            for i in range(self.t.size):
                w.writerow([repr(float(a)) for a in (self.t[i], *self.position[i], *self.unit[i], F[i])])


def _unit(spec, pos, vel):
    return vel / metric_eval_arrays(spec, pos, vel)[:, :1]


def _pieces(L_R, starts, spu, tol):
    modes, coefs, vdat, trunc = L_R.kernel_args()
    ts = np.linspace(0.0, 1.0, spu + 1)
    Y = np.empty((starts.shape[0], ts.size, 2))
    status = np.zeros(starts.shape[0], dtype=np.int64)
    maxabs = np.zeros(starts.shape[0])
    K.integrate_batch(K.EL, modes, coefs, vdat, trunc, 0.0, np.ascontiguousarray(starts), ts,
                      tol, tol, 1_000_000, Y, status, maxabs)
    bad = np.flatnonzero(status != K.OK)
    if bad.size:
        raise IntegrationError(f"piece {bad[0]}: {status_text(status[bad[0]])}", status=status[bad[0]])
    return ts, Y, maxabs


def geodesic_reconstruct(orbit, L_R, spec, v, band=None, t0=0, samples_per_unit=16, tol=1e-11,
                         check_pieces=10):
    """Geodesic through the states of a time-1 orbit.

    ``orbit`` is a (n + 1, 2) array of consecutive (x, r) iterates starting at
    integer time t0 (a ConnectionCandidate is accepted too).  Each unit time
    interval is re-integrated from its recorded state, so the track follows
    the record even where the dynamics is chaotic."""
    if hasattr(orbit, "orbit") and callable(orbit.orbit):
        t0 = -orbit.M_minus
        orbit = orbit.orbit()
    orbit = np.asarray(orbit, dtype=float)
    d = as_direction(v)
    n = orbit.shape[0] - 1
    R = getattr(L_R, "R", np.inf)
    bad = np.flatnonzero(np.abs(orbit[:, 1]) >= R)
    if bad.size:
        raise NotAGraph(f"slope bound |r| < {R} violated at step {t0 + bad[0]}", time=float(t0 + bad[0]))
    if n == 0:
        raise ValueError("orbit needs at least two states")
    ts, Y, maxabs = _pieces(L_R, orbit[:-1], samples_per_unit, tol)
    over = np.flatnonzero(maxabs >= R)
    if over.size:
        raise NotAGraph(f"slope bound |r| < {R} violated during step {t0 + over[0]}",
                        time=float(t0 + over[0]))
    jump = np.abs(Y[:, -1, :] - orbit[1:]).max()
    # drop the duplicated endpoint of each piece except the last
    tt = (t0 + np.arange(n)[:, None] + ts[None, :-1]).ravel()
    th = Y[:, :-1, 0].ravel()
    dth = Y[:, :-1, 1].ravel()
    tt = np.append(tt, t0 + n)
    th = np.append(th, Y[-1, -1, 0])
    dth = np.append(dth, Y[-1, -1, 1])
    ddth = L_R.el_field(tt, th, dth)[1]
    curve = GraphCurve(tt, th, dth, d, ddth)
    pos, vel = curve.curve()
    unit = _unit(spec, pos, vel)
    acc = ddth[:, None] * np.array(d.perp, dtype=float)[None, :]
    res = float(geodesic_residual(spec, pos, vel, acc).max())

    dist_plus = dist_minus = None
    if band is not None:
        k_idx = np.arange(0, tt.size, samples_per_unit)
        xk = th[k_idx]
        pk = pos[k_idx]
        mine = unit[k_idx]
        for sign, circ in ((1, band.gamma_plus), (-1, band.gamma_minus)):
            u = graph_eval(circ.samples, xk)
            other = _unit(spec, pk, d.vector(u))
            dist = float(np.min(np.linalg.norm(mine - other, axis=1)))
            if sign > 0:
                dist_plus = dist
            else:
                dist_minus = dist

    drift, dev = _geodesic_check(spec, d, curve, pos, unit, min(check_pieces, n) * samples_per_unit, tol)
    return GeodesicTrack(tt, pos, vel, unit, float(np.abs(dth).max()), res, float(jump),
                         dist_plus, dist_minus, drift, dev)


def _geodesic_check(spec, d, curve, pos, unit, m, tol):
    """Integrate the geodesic flow from the track start over the first m samples."""
    if m < 1:
        return 0.0, 0.0
    # arc length of the first m samples by Gauss-Legendre on each sample interval
    s = curve.spline()
    gx, gw = np.polynomial.legendre.leggauss(8)
    a, b = curve.t[:m], curve.t[1:m + 1]
    tq = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * gx[None, :]).ravel()
    wq = (0.5 * (b - a)[:, None] * gw[None, :]).ravel()
    F = metric_eval_arrays(spec, d.point(tq, s(tq)), d.vector(s(tq, 1)))[:, 0]
    length = float(np.sum(wq * F))
    start = TangentState(tuple(pos[0]), tuple(unit[0]))
    traj = geodesic_flow(spec, start, length, tol=min(tol, 1e-10),
                         times=np.linspace(0.0, length, 4 * m + 1))
    g = geodesic_to_graph(traj.states[:, :2], traj.states[:, 2:], d)
    inside = (g.t >= curve.t[0]) & (g.t <= curve.t[m])
    dev = float(np.max(np.abs(g.theta[inside] - s(g.t[inside])))) if inside.any() else 0.0
    return float(traj.drift), dev
