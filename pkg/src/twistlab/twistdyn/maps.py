"""Lifted cylinder maps (x, y) -> (X, Y) with X(x + 1, y) = X(x, y) + 1."""

from __future__ import annotations

import math

import numpy as np

from .. import _kernels as K
from ..metric import IntegrationError, status_text


class OrbitEscape(RuntimeError):
    """Orbit left the tube on which the map is meaningful."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class CylinderMap:
    name = "map"
    y_bound = math.inf

    def __call__(self, x, y):
        raise NotImplementedError

    def inverse(self, x, y):
        raise NotImplementedError

    def orbit(self, x0, y0, n, direction=1):
        """Points z_0 .. z_n (backward iterates when direction = -1)."""
        X, Y = self.orbits([x0], [y0], n, direction)
        return X[0], Y[0]

    def orbits(self, x0, y0, n, direction=1):
        x = np.array(x0, dtype=float)
        y = np.array(y0, dtype=float)
        X = np.empty((x.size, n + 1))
        Y = np.empty((x.size, n + 1))
        X[:, 0], Y[:, 0] = x, y
        step = self if direction > 0 else self.inverse
        for k in range(n):
            x, y = step(x, y)
            X[:, k + 1], Y[:, k + 1] = x, y
        return X, Y

    def check_tube(self, Y):
        if np.isfinite(self.y_bound):
            bad = np.argwhere(np.abs(Y) >= self.y_bound)
            if bad.size:
                raise OrbitEscape(f"orbit left |y| < {self.y_bound} at step {bad[0][-1]}",
                                  step=int(bad[0][-1]))


class ShearMap(CylinderMap):
    """(x, y) -> (x + a y, y)."""

    name = "shear"

    def __init__(self, twist=1.0):
        self.twist = float(twist)

    def __call__(self, x, y):
        return x + self.twist * y, y

    def inverse(self, x, y):
        return x - self.twist * y, y

    def orbits(self, x0, y0, n, direction=1):
        x = np.atleast_1d(np.asarray(x0, dtype=float))
        y = np.atleast_1d(np.asarray(y0, dtype=float))
        k = direction * np.arange(n + 1)
        return x[:, None] + self.twist * k[None, :] * y[:, None], np.repeat(y[:, None], n + 1, axis=1)


class RigidRotation(CylinderMap):
    name = "rotation"

    def __init__(self, alpha):
        self.alpha = float(alpha)

    def __call__(self, x, y):
        return x + self.alpha, y

    def inverse(self, x, y):
        return x - self.alpha, y


class StandardMap(CylinderMap):
    """y' = y + k/(2 pi) sin(2 pi x), x' = x + y'."""

    name = "standard"

    def __init__(self, k):
        self.k = float(k)

    def __call__(self, x, y):
        yn = y + self.k / (2 * math.pi) * np.sin(2 * math.pi * np.asarray(x))
        return x + yn, yn

    def inverse(self, x, y):
        xp = x - y
        return xp, y - self.k / (2 * math.pi) * np.sin(2 * math.pi * xp)


class EulerLagrangeMap(CylinderMap):
    """Time-1 map of the Euler-Lagrange flow of L_R in (x, r), from t = 0.

    ``y_bound`` defaults to R: beyond it L_R differs from the reduced
    Lagrangian and orbits lose their geodesic meaning."""

    name = "el-time1"

    def __init__(self, L_R, tol=1e-10, y_bound=None, max_steps_per_unit=5000):
        self.L = L_R
        self.tol = float(tol)
        self.y_bound = float(L_R.R if y_bound is None else y_bound)
        self.max_steps_per_unit = max_steps_per_unit

    def _run(self, x0, y0, times):
        modes, coefs, vdat, trunc = self.L.kernel_args()
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        Y0 = np.ascontiguousarray(np.column_stack([x0, y0]))
        out = np.empty((x0.size, times.size, 2))
        status = np.zeros(x0.size, dtype=np.int64)
        maxabs = np.zeros(x0.size)
        steps = int(self.max_steps_per_unit * max(1.0, abs(times[-1])))
        K.integrate_batch(K.EL, modes, coefs, vdat, trunc, 0.0, Y0,
                          np.ascontiguousarray(times), self.tol, self.tol, steps, out, status, maxabs)
        bad = np.flatnonzero(status != K.OK)
        if bad.size:
            raise IntegrationError(f"time-1 map integration failed: {status_text(status[bad[0]])}",
                                   status=status[bad[0]])
        return out

    def __call__(self, x, y):
        out = self._run(x, y, np.array([1.0]))
        return out[:, 0, 0].reshape(np.shape(x)), out[:, 0, 1].reshape(np.shape(y))

    def inverse(self, x, y):
        out = self._run(x, y, np.array([-1.0]))
        return out[:, 0, 0].reshape(np.shape(x)), out[:, 0, 1].reshape(np.shape(y))

    def orbits(self, x0, y0, n, direction=1):
        times = direction * np.arange(n + 1, dtype=float)
        out = self._run(x0, y0, times)
        return out[:, :, 0], out[:, :, 1]
