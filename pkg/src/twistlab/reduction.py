"""Reduced time-periodic Lagrangian of a Finsler metric and its truncation.

For a prime direction v the reduced Lagrangian is

    L(t, x, r) = F(t v + x v_perp, v + r v_perp),

1-periodic in t and x.  Graphs gamma(t) = t v + theta(t) v_perp are
reparametrized geodesics exactly when theta solves the Euler-Lagrange
equation of L.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicHermiteSpline

from . import _kernels as K
from .metric import IntegrationError, InvalidInput, metric_eval_arrays, status_text

# blend-zone shape: end transitions occupy BLEND_DELTA of the zone, and the
# two positive correction bumps are s^2 (1-s)^p and s^p (1-s)^2
BLEND_DELTA = 0.25
BLEND_POWER = 6.0


@dataclass(frozen=True)
class PrimeDirection:
    v: tuple

    def __post_init__(self):
        v = (int(self.v[0]), int(self.v[1]))
        if v == (0, 0):
            raise InvalidInput("v must be nonzero")
        if math.gcd(abs(v[0]), abs(v[1])) != 1:
            raise InvalidInput(f"v not prime: {v}")
        object.__setattr__(self, "v", v)

    @property
    def perp(self):
        return (-self.v[1], self.v[0])

    @property
    def norm2(self):
        return self.v[0] ** 2 + self.v[1] ** 2

    @property
    def norm(self):
        return math.sqrt(self.norm2)

    def vdat(self, level=0.0):
        return np.array([self.v[0], self.v[1], self.norm2, level], dtype=float)

    def point(self, t, x):
        """t v + x v_perp."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.stack([t * self.v[0] - x * self.v[1], t * self.v[1] + x * self.v[0]], axis=-1)

    def vector(self, r):
        """v + r v_perp."""
        return self.point(np.ones_like(np.asarray(r, dtype=float)), r)


def as_direction(v):
    return v if isinstance(v, PrimeDirection) else PrimeDirection(tuple(v))


class _LagrangianBase:
    metric = None
    direction = None

    def kernel_args(self):
        return self.metric.modes, self.metric.coefs, self.direction.vdat(), self._trunc

    def derivs(self, t, x, r):
        """Columns: L, Lx, Lr, Lrr, Lxr, Ltr, Lxx, Lxrr, Lt."""
        t, x, r = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=float)) for a in (t, x, r)))
        out = np.empty((t.size, 9))
        modes, coefs, vdat, trunc = self.kernel_args()
        K.lag_eval_many(np.ascontiguousarray(t.ravel()), np.ascontiguousarray(x.ravel()),
                        np.ascontiguousarray(r.ravel()), modes, coefs, vdat, trunc, out)
        return out

    def __call__(self, t, x, r):
        return self.derivs(t, x, r)[:, 0]

    def L_x(self, t, x, r):
        return self.derivs(t, x, r)[:, 1]

    def L_r(self, t, x, r):
        return self.derivs(t, x, r)[:, 2]

    def L_rr(self, t, x, r):
        return self.derivs(t, x, r)[:, 3]

    def el_field(self, t, x, r):
        """Right-hand side (x', r') of the Euler-Lagrange equation."""
        d = self.derivs(t, x, r)
        r = np.broadcast_to(np.atleast_1d(r), (d.shape[0],))
        return r, (d[:, 1] - d[:, 5] - r * d[:, 4]) / d[:, 3]


class ReducedLagrangian(_LagrangianBase):
    def __init__(self, metric, direction):
        self.metric = metric
        self.direction = as_direction(direction)
        trunc = np.zeros(K.TRUNC_SIZE)
        trunc[K.T_NV] = self.direction.norm
        trunc.setflags(write=False)
        self._trunc = trunc

    def __repr__(self):
        return f"ReducedLagrangian(v={self.direction.v})"


def build_reduced(spec, v):
    return ReducedLagrangian(spec, as_direction(v))


# --------------------------------------------------------------------------
# truncation
# --------------------------------------------------------------------------

class TruncationError(ValueError):
    pass


@dataclass
class LagrangianAudit:
    min_Lrr: float
    max_Lrr: float
    argmin: tuple
    C: float
    passed: bool
    bump_margin: float  # min over (t, x) samples of the correction weights / D


def _gl(n=64):
    return np.polynomial.legendre.leggauss(n)


def _pieces(R, m, delta):
    return [(R, R + delta * m), (R + delta * m, R + (1 - delta) * m), (R + (1 - delta) * m, R + m)]


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 4 * (35 - 84 * s + 70 * s ** 2 - 20 * s ** 3)


def _bump_moments(R, m, delta, p, nv):
    """Integrals needed to fix the two bump weights of each basis function."""
    gx, gw = _gl()
    Ro = R + m
    mom = {}
    for name in ("P1", "P2", "A", "D"):
        mom[name] = np.zeros(2)
    for a, b in _pieces(R, m, delta):
        sig = 0.5 * (b - a) * gx + 0.5 * (a + b)
        w = 0.5 * (b - a) * gw
        s = (sig - R) / m
        dens = {
            "P1": s ** 2 * (1 - s) ** p,
            "P2": s ** p * (1 - s) ** 2,
            "A": (1 - _smoothstep(s / delta)) * nv * (1 + sig ** 2) ** -1.5,
            "D": _smoothstep((s - (1 - delta)) / delta),
        }
        for k, d in dens.items():
            mom[k] += [np.sum(w * d), np.sum(w * (Ro - sig) * d)]
    return mom


def _bump_coefficients(R, m, delta, p, nv):
    """(a, b) weights for basis functions n, c0, c1, d (d per unit D)."""
    Ro = R + m
    mom = _bump_moments(R, m, delta, p, nv)
    M = np.column_stack([mom["P1"], mom["P2"]])
    sq = math.sqrt(1 + R * R)
    # inner value/slope at R, outer value/slope at R_out, base-density moments
    data = [
        ((nv * sq, nv * R / sq), (0.0, 0.0), mom["A"]),
        ((1.0, 0.0), (0.0, 0.0), np.zeros(2)),
        ((R, 1.0), (0.0, 0.0), np.zeros(2)),
        ((0.0, 0.0), (0.5 * Ro * Ro, Ro), mom["D"]),
    ]
    coef = []
    for (g0, g1), (h0, h1), base in data:
        rhs = np.array([h1 - g1 - base[0], h0 - g0 - g1 * m - base[1]])
        coef.extend(np.linalg.solve(M, rhs))
    return np.array(coef)


def _piece_moments(trunc):
    """Integrals of k and sigma k over each blend piece, per basis function."""
    R, m, delta = trunc[K.T_R], trunc[K.T_M], trunc[K.T_DELTA]
    gx, gw = _gl()
    k = np.empty(4)
    mom = np.zeros((3, 4, 2))
    for j, (a, b) in enumerate(_pieces(R, m, delta)):
        for xg, wg in zip(gx, gw):
            sig = 0.5 * (b - a) * xg + 0.5 * (a + b)
            K.blend_density(sig, trunc, k)
            w = 0.5 * (b - a) * wg
            mom[j, :, 0] += w * k
            mom[j, :, 1] += w * sig * k
    return mom.ravel()


def _tx_samples(L, n):
    s = (np.arange(n) + 0.5) / n
    T, X = np.meshgrid(s, s, indexing="ij")
    q = L.direction.point(T.ravel(), X.ravel())
    val, _, _ = L.metric.fields(q)
    v, vp = L.direction.v, L.direction.perp
    A = np.exp(val[:, 0])
    beta = val[:, 1] * v[0] + val[:, 2] * v[1]
    alpha = val[:, 1] * vp[0] + val[:, 2] * vp[1]
    return T.ravel(), X.ravel(), A, beta, alpha


def _choose_D(coef, A, beta, alpha):
    """D maximizing the smallest bump weight (relative to D) over samples."""
    aA, bA, aB, bB, aAl, bAl, aD, bD = coef

    def crit(D):
        wa = aA * A + aB * beta + aAl * alpha + aD * D
        wb = bA * A + bB * beta + bAl * alpha + bD * D
        return min(wa.min(), wb.min()) / D

    grid = np.geomspace(1e-3, 1e3, 601)
    vals = np.array([crit(D) for D in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda D: -crit(D), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * hi})
    D = float(res.x) if -res.fun >= vals[i] else float(grid[i])
    return D, crit(D)


class TruncatedLagrangian(_LagrangianBase):
    """L_R: equal to L for |r| <= R, to D r^2 / 2 for |r| >= R + margin.

    In between each r-basis function of L is continued by a second
    derivative built from positive pieces, so d2L_R/dr2 stays positive
    whenever the two correction weights are positive."""

    def __init__(self, inner, R, margin, D=None, audit_n=32, audit_nr=241):
        if R <= 0 or margin <= 0:
            raise InvalidInput("R and margin must be positive")
        self.inner = inner
        self.metric = inner.metric
        self.direction = inner.direction
        self.R = float(R)
        self.margin = float(margin)
        self.R_out = self.R + self.margin
        nv = self.direction.norm
        coef = _bump_coefficients(self.R, self.margin, BLEND_DELTA, BLEND_POWER, nv)
        _, _, A, beta, alpha = _tx_samples(inner, audit_n)
        if D is None:
            D, margin_w = _choose_D(coef, A, beta, alpha)
        else:
            D = float(D)
            aA, bA, aB, bB, aAl, bAl, aD, bD = coef
            margin_w = min((aA * A + aB * beta + aAl * alpha + aD * D).min(),
                           (bA * A + bB * beta + bAl * alpha + bD * D).min()) / D
        self.D = D
        trunc = np.zeros(K.TRUNC_SIZE)
        trunc[K.T_ENABLED] = 1.0
        trunc[K.T_R] = self.R
        trunc[K.T_M] = self.margin
        trunc[K.T_D] = D
        trunc[K.T_DELTA] = BLEND_DELTA
        trunc[K.T_P] = BLEND_POWER
        trunc[K.T_NV] = nv
        trunc[K.T_COEF:K.T_COEF + 8] = coef
        trunc[K.T_MOM:] = _piece_moments(trunc)
        trunc.setflags(write=False)
        self._trunc = trunc
        self.audit = self._audit(audit_n, audit_nr, margin_w)
        self.C = self.audit.C

    def __repr__(self):
        return f"TruncatedLagrangian(v={self.direction.v}, R={self.R}, R_out={self.R_out}, D={self.D:.6g})"

    def chi(self, r):
        """Blend indicator: 1 where L_R = L, 0 where L_R = D r^2/2."""
        rho = np.abs(np.asarray(r, dtype=float))
        return 1.0 - _smoothstep((rho - self.R) / self.margin)

    def audit_r_grid(self, nr):
        Ro = self.R_out
        return np.unique(np.concatenate([
            np.linspace(-Ro - 0.5, Ro + 0.5, nr),
            np.linspace(self.R, Ro, nr // 2),
            -np.linspace(self.R, Ro, nr // 2),
        ]))

    def _audit(self, n, nr, margin_w):
        T, X, _, _, _ = _tx_samples(self.inner, n)
        rs = self.audit_r_grid(nr)
        TT = np.repeat(T, rs.size)
        XX = np.repeat(X, rs.size)
        RR = np.tile(rs, T.size)
        lrr = self.derivs(TT, XX, RR)[:, 3]
        i = int(np.argmin(lrr))
        lo, hi = float(lrr[i]), float(lrr.max())
        C = max(hi, 1.0 / lo) if lo > 0 else math.inf
        return LagrangianAudit(lo, hi, (float(TT[i]), float(XX[i]), float(RR[i])), C,
                               bool(lo > 0), float(margin_w))


def truncate(L, R, margin, D=None, **audit):
    Lt = TruncatedLagrangian(L, R, margin, D=D, **audit)
    if not Lt.audit.passed:
        a = Lt.audit
        raise TruncationError(
            f"truncation audit failed: min d2L_R/dr2 = {a.min_Lrr:.3e} at (t, x, r) = {a.argmin}; "
            f"increase the margin (currently {margin}) or choose a different D (currently {Lt.D:.4g})")
    return Lt


# --------------------------------------------------------------------------
# Euler-Lagrange flow on the cylinder
# --------------------------------------------------------------------------

@dataclass
class CylinderTrajectory:
    t: np.ndarray
    x: np.ndarray
    r: np.ndarray
    max_abs_r: float

    def to_csv_rows(self):
        return [(repr(float(a)), repr(float(b)), repr(float(c))) for a, b, c in zip(self.t, self.x, self.r)]


def _run(kind, L, t0, Y0, times, tol, max_steps):
    modes, coefs, vdat, trunc = L.kernel_args()
    Y0 = np.ascontiguousarray(np.atleast_2d(Y0), dtype=float)
    times = np.ascontiguousarray(times, dtype=float)
    Y = np.empty((Y0.shape[0], times.size, Y0.shape[1]))
    status = np.zeros(Y0.shape[0], dtype=np.int64)
    maxabs = np.zeros(Y0.shape[0])
    K.integrate_batch(kind, modes, coefs, vdat, trunc, float(t0), Y0, times, tol, tol,
                      max_steps, Y, status, maxabs)
    return Y, status, maxabs


def el_flow(L, state, t0, t1, tol=1e-10, times=None, max_steps=50_000_000):
    """Euler-Lagrange solution through (x, r) at time t0, sampled at ``times``."""
    if times is None:
        times = np.array([t0, t1], dtype=float)
    Y, status, maxabs = _run(K.EL, L, t0, np.array(state, dtype=float), times, tol, max_steps)
    if status[0] != K.OK:
        raise IntegrationError(f"Euler-Lagrange flow: {status_text(status[0])}", status=status[0])
    return CylinderTrajectory(np.asarray(times, dtype=float), Y[0, :, 0], Y[0, :, 1], float(maxabs[0]))


def el_map(L, x, r, t0=0.0, t1=1.0, tol=1e-10, max_steps=50_000_000):
    """Time-(t0, t1) map of the Euler-Lagrange flow, vectorized over points."""
    x, r = np.broadcast_arrays(np.atleast_1d(np.asarray(x, dtype=float)),
                               np.atleast_1d(np.asarray(r, dtype=float)))
    Y, status, maxabs = _run(K.EL, L, t0, np.column_stack([x.ravel(), r.ravel()]),
                             np.array([t1], dtype=float), tol, max_steps)
    bad = np.flatnonzero(status != K.OK)
    if bad.size:
        raise IntegrationError(f"Euler-Lagrange flow failed for {bad.size} points "
                               f"({status_text(status[bad[0]])})", status=status[bad[0]])
    return Y[:, 0, 0].reshape(x.shape), Y[:, 0, 1].reshape(x.shape), maxabs.reshape(x.shape)


def el_orbit(L, x0, r0, n, direction=1, tol=1e-10, max_steps=None):
    """Iterates of the time-1 map (forward or backward) from t = 0."""
    times = direction * np.arange(n + 1, dtype=float)
    if max_steps is None:
        max_steps = 2000 * (n + 1)
    Y, status, maxabs = _run(K.EL, L, 0.0, np.array([x0, r0], dtype=float), times, tol, max_steps)
    if status[0] != K.OK:
        raise IntegrationError(f"orbit integration: {status_text(status[0])}", status=status[0])
    return Y[0, :, 0], Y[0, :, 1], float(maxabs[0])


# --------------------------------------------------------------------------
# graph curves and geodesics
# --------------------------------------------------------------------------

class NotAGraph(ValueError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


@dataclass
class GraphCurve:
    """Samples of theta and theta' (optionally theta'') on increasing times."""

    t: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    direction: PrimeDirection
    ddtheta: np.ndarray | None = None
    _spline: CubicHermiteSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.dtheta = np.asarray(self.dtheta, dtype=float)
        self.direction = as_direction(self.direction)

    @classmethod
    def from_function(cls, fun, dfun, t, direction, ddfun=None):
        t = np.asarray(t, dtype=float)
        return cls(t, fun(t), dfun(t), direction, None if ddfun is None else ddfun(t))

    @classmethod
    def from_trajectory(cls, traj, direction, L=None):
        dd = None
        if L is not None:
            dd = L.el_field(traj.t, traj.x, traj.r)[1]
        return cls(traj.t, traj.x, traj.r, direction, dd)

    def spline(self):
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.t, self.theta, self.dtheta)
        return self._spline

    def __call__(self, t):
        s = self.spline()
        return s(t), s(t, 1)

    def curve(self):
        """gamma(t) = t v + theta(t) v_perp and its derivative at the samples."""
        d = self.direction
        return d.point(self.t, self.theta), d.vector(self.dtheta)


@dataclass
class GeodesicSamples:
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray  # gamma'(t)
    unit: np.ndarray  # velocity / F
    F: np.ndarray


def graph_to_geodesic(curve, spec):
    pos, vel = curve.curve()
    F = metric_eval_arrays(spec, pos, vel)[:, 0]
    return GeodesicSamples(curve.t.copy(), pos, vel, vel / F[:, None], F)


def geodesic_to_graph(position, velocity, direction, R=None, times=None):
    """Inverse of ``graph_to_geodesic``: parameter t = <c, v>/|v|^2."""
    d = as_direction(direction)
    position = np.atleast_2d(np.asarray(position, dtype=float))
    velocity = np.atleast_2d(np.asarray(velocity, dtype=float))
    v = np.array(d.v, dtype=float)
    vp = np.array(d.perp, dtype=float)
    t = position @ v / d.norm2
    theta = position @ vp / d.norm2
    wv = velocity @ v
    bad = np.flatnonzero(wv <= 0)
    if bad.size:
        tt = times[bad[0]] if times is not None else t[bad[0]]
        raise NotAGraph(f"<c', v> <= 0 at time {tt!r}", time=tt)
    slope = velocity @ vp / wv
    if R is not None:
        bad = np.flatnonzero(np.abs(slope) >= R)
        if bad.size:
            tt = times[bad[0]] if times is not None else t[bad[0]]
            raise NotAGraph(f"slope bound |theta'| < {R} violated at time {tt!r}", time=tt)
    if np.any(np.diff(t) <= 0):
        raise NotAGraph("samples are not increasing along v")
    return GraphCurve(t, theta, slope, d)


def geodesic_residual(spec, pos, vel, acc):
    """Euler-Lagrange residual of the length functional along a curve.

    F_ww gamma'' + F_xw gamma' - F_x; zero for reparametrized geodesics."""
    m = metric_eval_arrays(spec, pos, vel)
    res = np.empty((pos.shape[0], 2))
    res[:, 0] = m[:, 5] * acc[:, 0] + m[:, 6] * acc[:, 1] + m[:, 8] * vel[:, 0] + m[:, 9] * vel[:, 1] - m[:, 1]
    res[:, 1] = m[:, 6] * acc[:, 0] + m[:, 7] * acc[:, 1] + m[:, 10] * vel[:, 0] + m[:, 11] * vel[:, 1] - m[:, 2]
    return np.hypot(res[:, 0], res[:, 1])


def graph_residual(spec, curve):
    if curve.ddtheta is None:
        raise InvalidInput("curve carries no second-derivative samples")
    d = curve.direction
    pos, vel = curve.curve()
    vp = np.array(d.perp, dtype=float)
    acc = curve.ddtheta[:, None] * vp[None, :]
    return geodesic_residual(spec, pos, vel, acc)


# --------------------------------------------------------------------------
# action = length
# --------------------------------------------------------------------------

@dataclass
class ActionLength:
    action: float
    length: float
    gap: float

    @property
    def relative_gap(self):
        return self.gap / abs(self.length) if self.length else self.gap


def action_length_check(L, curve, a, b, panels=64, order=24):
    if not a < b:
        raise InvalidInput("need a < b")
    s = curve.spline()

    def integrand(t):
        return float(L(t, s(t), s(t, 1))[0])

    # quad warns when 1e-12 hits round-off; the gap below measures the accuracy anyway
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        action, _ = quad(integrand, a, b, epsabs=0.0, epsrel=1e-12, limit=500)
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    tq = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * gx[None, :]).ravel()
    wq = (half[:, None] * gw[None, :]).ravel()
    d = curve.direction
    pos = d.point(tq, s(tq))
    vel = d.vector(s(tq, 1))
    F = metric_eval_arrays(L.metric, pos, vel)[:, 0]
    length = float(np.sum(wq * F))
    return ActionLength(float(action), length, abs(float(action) - length))
