"""Generating functions h(x, x') of twist factors.

For a factor of the Hamiltonian flow over [t0, t1], h(x, x') is the action
of the Euler-Lagrange trajectory of L_R from (t0, x) to (t1, x'), found by
shooting on the initial momentum.  With y = -d1 h and Y = d2 h the factor
maps (x, y) to (x', Y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator


class ShootingError(RuntimeError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


@dataclass
class GeneratingValue:
    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h11: np.ndarray
    h12: np.ndarray
    h22: np.ndarray


class ShearGenerating:
    """h(x, x') = (x' - x)^2 / (2a) for (x, y) -> (x + a y, y)."""

    def __init__(self, twist=1.0):
        self.a = float(twist)

    def eval(self, x, xp):
        d = np.asarray(xp, dtype=float) - np.asarray(x, dtype=float)
        c = np.full_like(d, 1.0 / self.a)
        return GeneratingValue(0.5 * d * d / self.a, -d / self.a, d / self.a, c, -c, c)

    def map(self, x, y):
        return x + self.a * y, y


class LagrangianGenerating:
    """Generating function of the time-(t0, t1) map of a Hamiltonian system."""

    def __init__(self, Hsys, t0, t1, tol=1e-12, max_iter=60):
        if not t1 > t0:
            raise ValueError("need t1 > t0")
        self.H = Hsys
        self.t0 = float(t0)
        self.t1 = float(t1)
        self.tol = tol
        self.max_iter = max_iter

    def map(self, x, y):
        return self.H.time_map(self.t0, self.t1, x, y, tol=self.tol)

    def shoot(self, x, xp):
        """Initial momenta p0 with X(x, p0) = x'; returns (p0, P, J, S)."""
        x, xp = np.broadcast_arrays(np.atleast_1d(np.asarray(x, dtype=float)),
                                    np.atleast_1d(np.asarray(xp, dtype=float)))
        x = x.ravel().copy()
        xp = xp.ravel().copy()
        dt = self.t1 - self.t0
        p = self.H.legendre(self.t0, x, (xp - x) / dt)
        lo = np.full_like(p, -np.inf)
        hi = np.full_like(p, np.inf)
        for _ in range(self.max_iter):
            X, P, J, S = self.H.time_map_variational(self.t0, self.t1, x, p, tol=self.tol)
            res = X - xp
            if np.all(np.abs(res) <= 1e-12 * (1.0 + np.abs(xp))):
                return p, P, J, S
            hi = np.where(res > 0, np.minimum(hi, p), hi)
            lo = np.where(res < 0, np.maximum(lo, p), lo)
            tw = J[:, 0, 1]
            pn = np.where(tw > 0, p - res / np.where(tw > 0, tw, 1.0), np.nan)
            ok = np.isfinite(pn) & (pn > lo) & (pn < hi)
            both = np.isfinite(lo) & np.isfinite(hi)
            step = np.maximum(1.0, np.abs(p))
            mid = 0.5 * (np.where(both, lo, 0.0) + np.where(both, hi, 0.0))
            fallback = np.where(both, mid, np.where(res > 0, p - step, p + step))
            p = np.where(ok, pn, fallback)
        bad = int(np.argmax(np.abs(res)))
        raise ShootingError(f"shooting from x={x[bad]!r} to x'={xp[bad]!r} did not converge "
                            f"(residual {res[bad]:.3e}, bracket [{lo[bad]!r}, {hi[bad]!r}])",
                            bracket=(lo[bad], hi[bad]))

    def eval(self, x, xp):
        shape = np.broadcast(np.asarray(x), np.asarray(xp)).shape
        p0, P, J, S = self.shoot(x, xp)
        Xp = J[:, 0, 1]
        out = GeneratingValue(S, -p0, P, J[:, 0, 0] / Xp, -1.0 / Xp, J[:, 1, 1] / Xp)
        if shape == ():
            return GeneratingValue(*(float(a[0]) for a in (out.h, out.h1, out.h2, out.h11, out.h12, out.h22)))
        return GeneratingValue(*(a.reshape(shape) for a in (out.h, out.h1, out.h2, out.h11, out.h12, out.h22)))


def factor_generating(factorization, i, tol=1e-12):
    bp = factorization.breakpoints
    return LagrangianGenerating(factorization.system, bp[i], bp[i + 1], tol=tol)


def generating_action(gen, x, xp):
    """h(x, x') and its first and second derivatives."""
    return gen.eval(x, xp)


class GeneratingTable:
    """Samples of h_i on a grid of (x, x' - x), with interpolation.

    Exact values come from ``gen``; the table serves plotting and starting
    guesses and audits the sign of the mixed derivative."""

    def __init__(self, gen, index=0, nx=16, d_range=(-1.0, 1.0), nd=17):
        self.gen = gen
        self.index = index
        self.xs = np.arange(nx + 1) / nx
        self.ds = np.linspace(d_range[0], d_range[1], nd)
        X, Dd = np.meshgrid(self.xs[:-1], self.ds, indexing="ij")
        v = gen.eval(X.ravel(), (X + Dd).ravel())
        tab = {}
        for name in ("h", "h1", "h2", "h12"):
            a = getattr(v, name).reshape(nx, nd)
            tab[name] = np.vstack([a, a[:1]])  # periodic in x
        self.values = tab
        self._interp = {k: RegularGridInterpolator((self.xs, self.ds), a, method="cubic")
                        for k, a in tab.items() if k != "h12"}

    @property
    def max_mixed(self):
        """Largest sampled d12 h (negative for a positive twist)."""
        return float(self.values["h12"].max())

    def interp(self, x, xp, name="h"):
        x = np.asarray(x, dtype=float)
        d = np.asarray(xp, dtype=float) - x
        pts = np.stack(np.broadcast_arrays(np.mod(x, 1.0), d), axis=-1)
        return self._interp[name](pts)

    def eval(self, x, xp):
        return self.gen.eval(x, xp)

    def map(self, x, y):
        return self.gen.map(x, y)
