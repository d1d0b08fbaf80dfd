"""Periodic orbits of twist-map compositions by discrete action minimization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_STEP = 0.25  # largest coordinate change per iteration


@dataclass
class OrbitConfiguration:
    p: int
    q: int
    x: np.ndarray  # x_0 .. x_{N-1}, N = n q; x_N = x_0 + p
    y: np.ndarray  # momenta y_k = -d1 h_k(x_k, x_{k+1})
    W: float
    residual: float  # max discrete Euler-Lagrange residual
    orbit_error: float
    converged: bool
    local_min: bool
    iterations: int

    @property
    def minimal(self):
        return self.converged and self.local_min


def _segments(tables, x, p):
    """Evaluate h_k(x_k, x_{k+1}) for all k, grouped by factor."""
    n = len(tables)
    N = x.size
    xn = np.append(x, x[0] + p)
    keys = ("h", "h1", "h2", "h11", "h12", "h22")
    out = {k: np.empty(N) for k in keys}
    for i in range(n):
        idx = np.arange(i, N, n)
        if idx.size == 0:
            continue
        v = tables[i].eval(xn[idx], xn[idx + 1])
        for k in keys:
            out[k][idx] = np.atleast_1d(getattr(v, k))
    return out


def action_gradient(tables, x, p):
    s = _segments(tables, x, p)
    g = s["h1"] + np.roll(s["h2"], 1)
    return float(np.sum(s["h"])), g, s


def _hessian(s):
    N = s["h"].size
    H = np.zeros((N, N))
    k = np.arange(N)
    H[k, k] += s["h11"] + np.roll(s["h22"], 1)
    kn = (k + 1) % N
    np.add.at(H, (k, kn), s["h12"])
    np.add.at(H, (kn, k), s["h12"])
    return H


def minimal_periodic_orbit(tables, p, q, init=None, tol=1e-9, max_iter=200, orbit_tol=1e-7):
    """Critical point of W = sum h_{k mod n}(x_k, x_{k+1}) with x_{k+nq} = x_k + p.

    Damped Newton steps with a backtracking line search that never lets W
    increase beyond round-off."""
    if q < 1 or math.gcd(int(p), int(q)) != 1:
        raise ValueError(f"need q >= 1 and gcd(p, q) = 1, got {p}/{q}")
    n = len(tables)
    N = n * q
    if init is None:
        x = np.arange(N) * (p / N)
    elif np.isscalar(init):
        x = float(init) + np.arange(N) * (p / N)
    else:
        x = np.array(init, dtype=float)
        if x.size != N:
            raise ValueError(f"init needs {N} entries")
    W, g, s = action_gradient(tables, x, p)
    it = 0
    while np.max(np.abs(g)) > tol and it < max_iter:
        it += 1
        H = _hessian(s)
        lam = np.linalg.eigvalsh(H)
        # shift indefinite Hessians so the step is a descent direction
        mu = 0.0 if lam[0] > 1e-10 * max(1.0, lam[-1]) else 2.0 * abs(lam[0]) + 1e-8 * max(1.0, lam[-1])
        step = -np.linalg.solve(H + mu * np.eye(N), g)
        big = np.max(np.abs(step))
        if big > MAX_STEP:
            step *= MAX_STEP / big
        alpha = 1.0
        gnorm = np.max(np.abs(g))
        slope = float(g @ step)
        noise = 64 * np.finfo(float).eps * max(1.0, abs(W))
        while True:
            xt = x + alpha * step
            Wt, gt, st = action_gradient(tables, xt, p)
            if Wt <= W + 1e-4 * alpha * slope or (Wt <= W + noise and np.max(np.abs(gt)) < gnorm):
                break
            alpha *= 0.5
            if alpha < 1e-12:
                break
        if alpha < 1e-12:
            break
        x, W, g, s = xt, Wt, gt, st
    res = float(np.max(np.abs(g)))
    lam_min = float(np.linalg.eigvalsh(_hessian(s))[0]) if N > 1 else float(
        s["h11"][0] + s["h22"][0] + 2 * s["h12"][0])
    y = -s["h1"]
    err = 0.0
    for k in range(N):
        X, Y = tables[k % n].map(np.array([x[k]]), np.array([y[k]]))
        xn = x[k + 1] if k + 1 < N else x[0] + p
        yn = y[k + 1] if k + 1 < N else y[0]
        err = max(err, abs(float(np.ravel(X)[0]) - xn), abs(float(np.ravel(Y)[0]) - yn))
    return OrbitConfiguration(int(p), int(q), x, y, W, res, err, res <= tol and err <= orbit_tol,
                              lam_min >= -1e-8, it)
