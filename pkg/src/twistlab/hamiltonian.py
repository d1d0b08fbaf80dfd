"""Legendre transform, Hamiltonian of a truncated Lagrangian, and twist factorization.

H(t, x, p) = p r* - L_R(t, x, r*)  with  dL_R/dr(t, x, r*) = p.

The time-(s, t) maps of H are computed on the lifted cylinder R x R.  The
time-1 map is split into n consecutive factors, each audited for positive
twist dX/dp > 0 through the variational equations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .metric import IntegrationError, InvalidInput, status_text

TWIST_FLOOR = 1e-10


class LegendreError(RuntimeError):
    pass


class FactorizationError(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


def _arrays(*args):
    arrs = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=float)) for a in args))
    return [np.ascontiguousarray(a.ravel()) for a in arrs], arrs[0].shape


class HamiltonianSystem:
    def __init__(self, L_R):
        self.L = L_R
        self.D = L_R.D
        self.R_out = L_R.R_out

    def __repr__(self):
        return f"HamiltonianSystem({self.L!r})"

    @property
    def p_tail(self):
        """|p| beyond which H = p^2 / (2D)."""
        return self.D * self.R_out

    def legendre(self, t, x, r):
        return self.L.derivs(t, x, r)[:, 2]

    def legendre_inverse(self, t, x, p, tol=1e-13):
        (t, x, p), shape = _arrays(t, x, p)
        r = np.empty_like(p)
        st = np.empty(p.size, dtype=np.int64)
        modes, coefs, vdat, trunc = self.L.kernel_args()
        K.legendre_inv_many(t, x, p, modes, coefs, vdat, trunc, tol, r, st)
        bad = np.flatnonzero(st != K.OK)
        if bad.size:
            i = bad[0]
            raise LegendreError(f"Legendre inversion did not converge at (t, x, p) = "
                                f"({t[i]!r}, {x[i]!r}, {p[i]!r}); check the convexity audit")
        return r.reshape(shape)

    def hamiltonian_eval(self, t, x, p):
        """(H, dH/dx, dH/dp)."""
        (t, x, p), shape = _arrays(t, x, p)
        r = self.legendre_inverse(t, x, p)
        d = self.L.derivs(t, x, r)
        H = p * r - d[:, 0]
        return H.reshape(shape), (-d[:, 1]).reshape(shape), r.reshape(shape)

    def __call__(self, t, x, p):
        return self.hamiltonian_eval(t, x, p)[0]

    def d2H_dp2(self, t, x, p):
        r = self.legendre_inverse(t, x, p)
        return 1.0 / self.L.derivs(t, x, r)[:, 3]

    def hpp_audit(self, n=32, n_p=201):
        """Sampled range of d2H/dp2 and C' = max(max, 1/min)."""
        s = (np.arange(n) + 0.5) / n
        P = self.D * (self.R_out + 1.0)
        ps = np.linspace(-P, P, n_p)
        T, X, Pp = np.meshgrid(s, s, ps, indexing="ij")
        h = self.d2H_dp2(T.ravel(), X.ravel(), Pp.ravel())
        lo, hi = float(h.min()), float(h.max())
        return lo, hi, max(hi, 1.0 / lo)

    # flows ----------------------------------------------------------------

    def _batch(self, kind, s, t, Y0, tol, max_steps):
        modes, coefs, vdat, trunc = self.L.kernel_args()
        Y0 = np.ascontiguousarray(Y0, dtype=float)
        Y = np.empty((Y0.shape[0], 1, Y0.shape[1]))
        status = np.zeros(Y0.shape[0], dtype=np.int64)
        maxabs = np.zeros(Y0.shape[0])
        K.integrate_batch(kind, modes, coefs, vdat, trunc, float(s), Y0,
                          np.array([float(t)]), tol, tol, max_steps, Y, status, maxabs)
        bad = np.flatnonzero(status != K.OK)
        if bad.size:
            i = bad[0]
            raise IntegrationError(f"Hamiltonian flow from {tuple(Y0[i, :2])} failed: "
                                   f"{status_text(status[i])}", status=status[i])
        return Y[:, 0, :], maxabs

    def time_map(self, s, t, x, p, tol=1e-11, max_steps=5_000_000):
        """Lifted time-(s, t) map psi^{s,t}(x, p)."""
        (x, p), shape = _arrays(x, p)
        Y, _ = self._batch(K.HAM, s, t, np.column_stack([x, p]), tol, max_steps)
        return Y[:, 0].reshape(shape), Y[:, 1].reshape(shape)

    def time_map_max_p(self, s, t, x, p, tol=1e-11, max_steps=5_000_000):
        (x, p), shape = _arrays(x, p)
        Y, maxabs = self._batch(K.HAM, s, t, np.column_stack([x, p]), tol, max_steps)
        return Y[:, 0].reshape(shape), Y[:, 1].reshape(shape), maxabs.reshape(shape)

    def time_map_variational(self, s, t, x, p, tol=1e-11, max_steps=5_000_000):
        """(X, P, J, S): image, Jacobian d(X, P)/d(x, p), and action of L_R."""
        (x, p), shape = _arrays(x, p)
        Y0 = np.zeros((x.size, 7))
        Y0[:, 0] = x
        Y0[:, 1] = p
        Y0[:, 2] = 1.0
        Y0[:, 5] = 1.0
        Y, _ = self._batch(K.HAMVAR, s, t, Y0, tol, max_steps)
        J = Y[:, 2:6].reshape(-1, 2, 2)
        return (Y[:, 0].reshape(shape), Y[:, 1].reshape(shape),
                J.reshape(shape + (2, 2)), Y[:, 6].reshape(shape))


def legendre(Hsys, t, point):
    x, r = point
    return x, Hsys.legendre(t, x, r)


def legendre_inverse(Hsys, t, point):
    x, p = point
    return x, Hsys.legendre_inverse(t, x, p)


def hamiltonian_eval(Hsys, t, x, p):
    return Hsys.hamiltonian_eval(t, x, p)


def time_map(Hsys, s, t, point, tol=1e-11):
    if not s < t:
        raise InvalidInput("time_map needs s < t")
    return Hsys.time_map(s, t, point[0], point[1], tol=tol)


# --------------------------------------------------------------------------
# twist factorization
# --------------------------------------------------------------------------

@dataclass
class FactorAudit:
    index: int
    t0: float
    t1: float
    min_twist: float  # min dX/dp over the grid
    argmin: tuple
    min_twist_lagrangian: float  # min dX/dr (Lagrangian coordinates)
    det_error: float

    @property
    def passed(self):
        return self.min_twist > TWIST_FLOOR


@dataclass
class TwistFactorization:
    system: HamiltonianSystem
    n: int
    breakpoints: np.ndarray
    audits: list
    P: float
    grid: int
    tol: float
    invariance_max_p: float
    history: list = field(default_factory=list)  # (n, [min twist per factor]) per attempt

    @property
    def min_twist(self):
        return [a.min_twist for a in self.audits]

    @property
    def det_error(self):
        return [a.det_error for a in self.audits]

    def factor(self, i, x, p):
        return self.system.time_map(self.breakpoints[i], self.breakpoints[i + 1], x, p, tol=self.tol)

    def compose(self, x, p):
        for i in range(self.n):
            x, p = self.factor(i, x, p)
        return x, p

    def report(self):
        return {
            "n": self.n,
            "breakpoints": [float(b) for b in self.breakpoints],
            "min_twist": [float(a.min_twist) for a in self.audits],
            "min_twist_lagrangian": [float(a.min_twist_lagrangian) for a in self.audits],
            "det_error": [float(a.det_error) for a in self.audits],
            "P": float(self.P),
            "audit_grid": self.grid,
            "invariance_max_p": float(self.invariance_max_p),
            "history": [{"n": n, "min_twist": [float(v) for v in m]} for n, m in self.history],
        }

    def to_json(self):
        return json.dumps(self.report(), indent=2, sort_keys=True)


def default_tube(Hsys, slack=0.05):
    return Hsys.D * (Hsys.R_out + 1.0) * (1.0 + slack)


def tube_grid(P, n):
    xs = np.arange(n) / n
    ps = np.linspace(-P, P, n)
    X, Pp = np.meshgrid(xs, ps, indexing="ij")
    return X.ravel(), Pp.ravel()


def check_tube(Hsys, P, n=64, tol=1e-10):
    """Largest |p| reached over t in [0, 1] by orbits started on a grid of the tube."""
    x, p = tube_grid(P, n)
    _, _, m = Hsys.time_map_max_p(0.0, 1.0, x, p, tol=tol)
    return float(m.max())


def audit_factor(Hsys, i, t0, t1, P, grid, tol):
    x, p = tube_grid(P, grid)
    X, Pn, J, _ = Hsys.time_map_variational(t0, t1, x, p, tol=tol)
    tw = J[:, 0, 1]
    k = int(np.argmin(tw))
    r = Hsys.legendre_inverse(t0, x, p)
    lrr = Hsys.L.derivs(t0, x, r)[:, 3]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return FactorAudit(i, float(t0), float(t1), float(tw[k]), (float(x[k]), float(p[k])),
                       float(np.min(tw * lrr)), float(np.max(np.abs(det - 1.0))))


def factorize_time1(Hsys, P=None, tol=1e-11, cap=1024, grid=64):
    """Split the time-1 map into n = 1, 2, 4, ... equal factors until all twist audits pass."""
    if P is None:
        P = default_tube(Hsys)
    if P < Hsys.p_tail:
        raise InvalidInput(f"tube P={P} is inside the non-quadratic region (needs >= {Hsys.p_tail})")
    maxp = check_tube(Hsys, P, n=min(grid, 32), tol=tol)
    if maxp > P * (1 + 1e-9):
        raise FactorizationError(f"tube |p| <= {P} not invariant: orbit reached |p| = {maxp}")
    history = []
    n = 1
    while n <= cap:
        bp = np.linspace(0.0, 1.0, n + 1)
        audits = []
        for i in range(n):
            a = audit_factor(Hsys, i, bp[i], bp[i + 1], P, grid, tol)
            audits.append(a)
            if not a.passed:
                break
        history.append((n, [a.min_twist for a in audits]))
        if len(audits) == n and all(a.passed for a in audits):
            return TwistFactorization(Hsys, n, bp, audits, float(P), grid, tol, maxp, history)
        n *= 2
    raise FactorizationError(f"no twist factorization with n <= {cap} factors", history)
