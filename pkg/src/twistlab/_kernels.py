"""Compiled kernels: Fourier fields, Randers metric, reduced Lagrangian and
an adaptive DOP853 driver shared by every flow in the package.

Flows are selected by an integer ``kind``:

    GEODESIC  state (x1, x2, w1, w2)        Euler-Lagrange flow of F^2/2
    EL        state (x, r)                  Euler-Lagrange flow of L_R
    HAM       state (x, p)                  Hamilton's equations of H
    HAMVAR    state (x, p, J11, J12, J21, J22, S)
              Hamiltonian flow with first variational equations and action
"""

import math

import numpy as np
from numba import njit, prange
from scipy.integrate._ivp import dop853_coefficients as _dop

GEODESIC = 0
EL = 1
HAM = 2
HAMVAR = 3

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2
LEGENDRE_FAIL = 3
NOT_A_GRAPH = 4
NO_EVENT = 5

TWO_PI = 2.0 * math.pi

_NST = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NST, :_NST])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NST])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

GL_X, GL_W = np.polynomial.legendre.leggauss(8)

# trunc layout
T_ENABLED, T_R, T_M, T_D, T_DELTA, T_P, T_NV = range(7)
T_COEF = 7
# per piece j and basis function c: trunc[T_MOM + 2*(4*j + c) + (0, 1)] = (int k, int sigma k)
T_MOM = 15
TRUNC_SIZE = 39


# --------------------------------------------------------------------------
# Fourier fields u, b1, b2
# --------------------------------------------------------------------------

@njit(cache=True)
def fields(q1, q2, modes, coefs, val, grad, hess):
    """val[f], grad[f, 2], hess[f, 3] = (h11, h12, h22) for f in (u, b1, b2)."""
    for f in range(3):
        val[f] = 0.0
        grad[f, 0] = 0.0
        grad[f, 1] = 0.0
        hess[f, 0] = 0.0
        hess[f, 1] = 0.0
        hess[f, 2] = 0.0
    for j in range(modes.shape[0]):
        k1 = modes[j, 0]
        k2 = modes[j, 1]
        ph = TWO_PI * (k1 * q1 + k2 * q2)
        c = math.cos(ph)
        s = math.sin(ph)
        for f in range(3):
            a = coefs[f, j, 0]
            b = coefs[f, j, 1]
            if a == 0.0 and b == 0.0:
                continue
            v = a * c + b * s
            dv = TWO_PI * (-a * s + b * c)
            val[f] += v
            grad[f, 0] += k1 * dv
            grad[f, 1] += k2 * dv
            w = -TWO_PI * TWO_PI * v
            hess[f, 0] += w * k1 * k1
            hess[f, 1] += w * k1 * k2
            hess[f, 2] += w * k2 * k2


# --------------------------------------------------------------------------
# Randers metric F(x, w) = exp(u) |w| + b.w
# --------------------------------------------------------------------------

@njit(cache=True)
def metric_eval(x1, x2, w1, w2, modes, coefs, out):
    """out = [F, Fx1, Fx2, Fw1, Fw2, Fww11, Fww12, Fww22,
              Fxw(i=1,j=1), Fxw(1,2), Fxw(2,1), Fxw(2,2), g11, g12, g22]

    Fxw(i, j) is d/dx_j of dF/dw_i; g is the Hessian of F^2/2 in w.
    """
    val = np.empty(3)
    grad = np.empty((3, 2))
    hess = np.empty((3, 3))
    fields(x1, x2, modes, coefs, val, grad, hess)
    eu = math.exp(val[0])
    nw = math.sqrt(w1 * w1 + w2 * w2)
    F = eu * nw + val[1] * w1 + val[2] * w2
    out[0] = F
    for j in range(2):
        out[1 + j] = eu * grad[0, j] * nw + w1 * grad[1, j] + w2 * grad[2, j]
    fw1 = eu * w1 / nw + val[1]
    fw2 = eu * w2 / nw + val[2]
    out[3] = fw1
    out[4] = fw2
    n3 = nw * nw * nw
    out[5] = eu * (1.0 / nw - w1 * w1 / n3)
    out[6] = eu * (-w1 * w2 / n3)
    out[7] = eu * (1.0 / nw - w2 * w2 / n3)
    out[8] = eu * grad[0, 0] * w1 / nw + grad[1, 0]
    out[9] = eu * grad[0, 1] * w1 / nw + grad[1, 1]
    out[10] = eu * grad[0, 0] * w2 / nw + grad[2, 0]
    out[11] = eu * grad[0, 1] * w2 / nw + grad[2, 1]
    out[12] = fw1 * fw1 + F * out[5]
    out[13] = fw1 * fw2 + F * out[6]
    out[14] = fw2 * fw2 + F * out[7]


@njit(cache=True)
def _geodesic_rhs(y, modes, coefs, out):
    m = np.empty(15)
    metric_eval(y[0], y[1], y[2], y[3], modes, coefs, m)
    F = m[0]
    w1 = y[2]
    w2 = y[3]
    # rhs_i = F F_xi - sum_j (F_xj F_wi + F Fxw(i, j)) w_j
    r1 = F * m[1] - (m[1] * m[3] + F * m[8]) * w1 - (m[2] * m[3] + F * m[9]) * w2
    r2 = F * m[2] - (m[1] * m[4] + F * m[10]) * w1 - (m[2] * m[4] + F * m[11]) * w2
    g11 = m[12]
    g12 = m[13]
    g22 = m[14]
    det = g11 * g22 - g12 * g12
    out[0] = w1
    out[1] = w2
    out[2] = (g22 * r1 - g12 * r2) / det
    out[3] = (-g12 * r1 + g11 * r2) / det


# --------------------------------------------------------------------------
# Truncation basis: L_R = A n(r) + beta c0(r) + alpha c1(r) + D d(r)
# --------------------------------------------------------------------------

@njit(cache=True)
def _smoothstep(s):
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return s * s * s * s * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s)


@njit(cache=True)
def blend_density(sig, trunc, k):
    """Second r-derivatives of the four basis functions inside the blend zone."""
    R = trunc[T_R]
    m = trunc[T_M]
    delta = trunc[T_DELTA]
    p = trunc[T_P]
    nv = trunc[T_NV]
    s = (sig - R) / m
    chia = 1.0 - _smoothstep(s / delta)
    chib = _smoothstep((s - (1.0 - delta)) / delta)
    om = 1.0 - s
    if om < 0.0:
        om = 0.0
    sp = s if s > 0.0 else 0.0
    ip = int(p)
    omp = 1.0
    spp = 1.0
    for _ in range(ip):
        omp *= om
        spp *= sp
    P1 = sp * sp * omp
    P2 = spp * om * om
    q = 1.0 + sig * sig
    n2 = nv / (q * math.sqrt(q))
    c = T_COEF
    k[0] = chia * n2 + trunc[c] * P1 + trunc[c + 1] * P2
    k[1] = trunc[c + 2] * P1 + trunc[c + 3] * P2
    k[2] = trunc[c + 4] * P1 + trunc[c + 5] * P2
    k[3] = chib + trunc[c + 6] * P1 + trunc[c + 7] * P2


@njit(cache=True)
def _accumulate(a, b, rho, trunc, I0, I1):
    if b <= a:
        return
    k = np.empty(4)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    for i in range(GL_X.shape[0]):
        sig = mid + half * GL_X[i]
        blend_density(sig, trunc, k)
        w = half * GL_W[i]
        for j in range(4):
            I0[j] += w * k[j]
            I1[j] += w * (rho - sig) * k[j]


@njit(cache=True)
def basis(r, trunc, out):
    """out[3*j + d] = d-th r-derivative of basis function j (n, c0, c1, d)."""
    nv = trunc[T_NV]
    rho = abs(r)
    sg = 1.0 if r >= 0.0 else -1.0
    for i in range(12):
        out[i] = 0.0
    R = trunc[T_R]
    m = trunc[T_M]
    if trunc[T_ENABLED] == 0.0 or rho <= R:
        sq = math.sqrt(1.0 + r * r)
        out[0] = nv * sq
        out[1] = nv * r / sq
        out[2] = nv / (sq * sq * sq)
        out[3] = 1.0
        out[6] = r
        out[7] = 1.0
        return
    Ro = R + m
    if rho >= Ro:
        out[9] = 0.5 * r * r
        out[10] = r
        out[11] = 1.0
        return
    delta = trunc[T_DELTA]
    I0 = np.zeros(4)
    I1 = np.zeros(4)
    edges = (R, R + delta * m, R + (1.0 - delta) * m, Ro)
    for piece in range(3):
        a = edges[piece]
        b = edges[piece + 1]
        if rho >= b:
            # whole piece: precomputed moments
            for j in range(4):
                base = T_MOM + 2 * (4 * piece + j)
                I0[j] += trunc[base]
                I1[j] += rho * trunc[base] - trunc[base + 1]
        else:
            _accumulate(a, rho, rho, trunc, I0, I1)
            break
    k = np.empty(4)
    blend_density(rho, trunc, k)
    sqR = math.sqrt(1.0 + R * R)
    g0 = (nv * sqR, 1.0, R, 0.0)
    g1 = (nv * R / sqR, 0.0, 1.0, 0.0)
    vals = np.empty(4)
    ders = np.empty(4)
    for j in range(4):
        vals[j] = g0[j] + g1[j] * (rho - R) + I1[j]
        ders[j] = g1[j] + I0[j]
    # n, c0, d even; c1 odd
    out[0] = vals[0]
    out[1] = sg * ders[0]
    out[2] = k[0]
    out[3] = vals[1]
    out[4] = sg * ders[1]
    out[5] = k[1]
    out[6] = sg * vals[2]
    out[7] = ders[2]
    out[8] = sg * k[2]
    out[9] = vals[3]
    out[10] = sg * ders[3]
    out[11] = k[3]


# --------------------------------------------------------------------------
# Reduced Lagrangian L(t, x, r) = F(t v + x v_perp, v + r v_perp)
# --------------------------------------------------------------------------

@njit(cache=True)
def lag_eval(t, x, r, modes, coefs, vdat, trunc, out):
    """out = [L, Lx, Lr, Lrr, Lxr, Ltr, Lxx, Lxrr, Lt]."""
    v1 = vdat[0]
    v2 = vdat[1]
    p1 = -v2
    p2 = v1
    q1 = t * v1 + x * p1
    q2 = t * v2 + x * p2
    val = np.empty(3)
    grad = np.empty((3, 2))
    hess = np.empty((3, 3))
    fields(q1, q2, modes, coefs, val, grad, hess)
    bs = np.empty(12)
    basis(r, trunc, bs)
    A = math.exp(val[0])
    ux = grad[0, 0] * p1 + grad[0, 1] * p2
    ut = grad[0, 0] * v1 + grad[0, 1] * v2
    uxx = hess[0, 0] * p1 * p1 + 2.0 * hess[0, 1] * p1 * p2 + hess[0, 2] * p2 * p2
    Ax = A * ux
    At = A * ut
    Axx = A * (ux * ux + uxx)
    # beta = b.v, alpha = b.v_perp
    be = val[1] * v1 + val[2] * v2
    al = val[1] * p1 + val[2] * p2
    g1x = grad[1, 0] * p1 + grad[1, 1] * p2
    g2x = grad[2, 0] * p1 + grad[2, 1] * p2
    g1t = grad[1, 0] * v1 + grad[1, 1] * v2
    g2t = grad[2, 0] * v1 + grad[2, 1] * v2
    h1xx = hess[1, 0] * p1 * p1 + 2.0 * hess[1, 1] * p1 * p2 + hess[1, 2] * p2 * p2
    h2xx = hess[2, 0] * p1 * p1 + 2.0 * hess[2, 1] * p1 * p2 + hess[2, 2] * p2 * p2
    bex = g1x * v1 + g2x * v2
    alx = g1x * p1 + g2x * p2
    bet = g1t * v1 + g2t * v2
    alt = g1t * p1 + g2t * p2
    bexx = h1xx * v1 + h2xx * v2
    alxx = h1xx * p1 + h2xx * p2
    D = trunc[T_D] if trunc[T_ENABLED] != 0.0 else 0.0
    n, n1, n2 = bs[0], bs[1], bs[2]
    c0, c01, c02 = bs[3], bs[4], bs[5]
    c1, c11, c12 = bs[6], bs[7], bs[8]
    d2 = bs[11]
    out[0] = A * n + be * c0 + al * c1 + D * bs[9]
    out[1] = Ax * n + bex * c0 + alx * c1
    out[2] = A * n1 + be * c01 + al * c11 + D * bs[10]
    out[3] = A * n2 + be * c02 + al * c12 + D * d2
    out[4] = Ax * n1 + bex * c01 + alx * c11
    out[5] = At * n1 + bet * c01 + alt * c11
    out[6] = Axx * n + bexx * c0 + alxx * c1
    out[7] = Ax * n2 + bex * c02 + alx * c12
    out[8] = At * n + bet * c0 + alt * c1


@njit(cache=True)
def legendre_inv(t, x, p, modes, coefs, vdat, trunc, tol):
    """Solve dL/dr(t, x, r) = p by safeguarded Newton-bisection.

    Returns (r, status)."""
    out = np.empty(9)
    if trunc[T_ENABLED] != 0.0:
        D = trunc[T_D]
        Ro = trunc[T_R] + trunc[T_M]
        if abs(p) >= D * Ro:
            return p / D, OK
        lo = -Ro
        hi = Ro
    else:
        lo = -1.0
        hi = 1.0
        for _ in range(200):
            lag_eval(t, x, lo, modes, coefs, vdat, trunc, out)
            if out[2] < p:
                break
            lo *= 2.0
        for _ in range(200):
            lag_eval(t, x, hi, modes, coefs, vdat, trunc, out)
            if out[2] > p:
                break
            hi *= 2.0
    # starting guess from the untruncated profile at r = 0:
    # L_r ~ alpha + a r / sqrt(1 + r^2) with a = L_rr(0)
    lag_eval(t, x, 0.0, modes, coefs, vdat, trunc, out)
    a = out[3]
    z = p - out[2]
    if abs(z) < 0.999 * a:
        r = z / math.sqrt(a * a - z * z)
        if not (lo < r < hi):
            r = 0.5 * (lo + hi)
    else:
        r = 0.5 * (lo + hi)
    scale = max(1.0, abs(p))
    for _ in range(200):
        lag_eval(t, x, r, modes, coefs, vdat, trunc, out)
        res = out[2] - p
        if abs(res) <= tol * scale:
            return r, OK
        if res > 0.0:
            hi = r
        else:
            lo = r
        rn = r - res / out[3]
        if not (lo < rn < hi):
            rn = 0.5 * (lo + hi)
        if abs(rn - r) <= 1e-16 * max(1.0, abs(r)):
            return rn, OK
        r = rn
    return r, LEGENDRE_FAIL


@njit(cache=True)
def rhs(kind, t, y, modes, coefs, vdat, trunc, out):
    if kind == GEODESIC:
        _geodesic_rhs(y, modes, coefs, out)
        return OK
    lo = np.empty(9)
    if kind == EL:
        lag_eval(t, y[0], y[1], modes, coefs, vdat, trunc, lo)
        out[0] = y[1]
        out[1] = (lo[1] - lo[5] - y[1] * lo[4]) / lo[3]
        return OK
    r, st = legendre_inv(t, y[0], y[1], modes, coefs, vdat, trunc, 1e-14)
    if st != OK:
        return st
    lag_eval(t, y[0], r, modes, coefs, vdat, trunc, lo)
    out[0] = r
    out[1] = lo[1]
    if kind == HAMVAR:
        hpx = -lo[4] / lo[3]
        hpp = 1.0 / lo[3]
        hxx = -lo[6] + lo[4] * lo[4] / lo[3]
        # J' = M J, M = [[hpx, hpp], [-hxx, -hpx]]
        j11, j12, j21, j22 = y[2], y[3], y[4], y[5]
        out[2] = hpx * j11 + hpp * j21
        out[3] = hpx * j12 + hpp * j22
        out[4] = -hxx * j11 - hpx * j21
        out[5] = -hxx * j12 - hpx * j22
        out[6] = lo[0]
    return OK


# --------------------------------------------------------------------------
# DOP853 driver
# --------------------------------------------------------------------------

@njit(cache=True)
def _rk_step(kind, t, y, f, h, modes, coefs, vdat, trunc, K, ynew, fnew):
    n = y.shape[0]
    K[0, :] = f
    tmp = np.empty(n)
    for s in range(1, _NST):
        for i in range(n):
            acc = 0.0
            for j in range(s):
                acc += _A[s, j] * K[j, i]
            tmp[i] = y[i] + h * acc
        st = rhs(kind, t + _C[s] * h, tmp, modes, coefs, vdat, trunc, K[s])
        if st != OK:
            return st
    for i in range(n):
        acc = 0.0
        for j in range(_NST):
            acc += _B[j] * K[j, i]
        ynew[i] = y[i] + h * acc
    st = rhs(kind, t + h, ynew, modes, coefs, vdat, trunc, fnew)
    if st != OK:
        return st
    K[_NST, :] = fnew
    return OK


@njit(cache=True)
def _err_norm(K, h, y, ynew, rtol, atol):
    n = y.shape[0]
    e5 = 0.0
    e3 = 0.0
    for i in range(n):
        sc = atol + max(abs(y[i]), abs(ynew[i])) * rtol
        a5 = 0.0
        a3 = 0.0
        for j in range(_NST + 1):
            a5 += _E5[j] * K[j, i]
            a3 += _E3[j] * K[j, i]
        e5 += (a5 / sc) ** 2
        e3 += (a3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    den = e5 + 0.01 * e3
    return abs(h) * e5 / math.sqrt(den * n)


@njit(cache=True)
def _initial_step(kind, t, y, f, direction, rtol, atol, modes, coefs, vdat, trunc):
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d0 += (y[i] / sc) ** 2
        d1 += (f[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y + h0 * direction * f
    f1 = np.empty(n)
    rhs(kind, t + h0 * direction, y1, modes, coefs, vdat, trunc, f1)
    d2 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d2 += ((f1[i] - f[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1)


@njit(cache=True)
def _periodic_dims(kind):
    if kind == GEODESIC:
        return 2
    return 1


@njit(cache=True)
def _save_state(info, y, offs, nper, t):
    info[2] = t
    if info.shape[0] >= 4 + y.shape[0]:
        for i in range(y.shape[0]):
            info[4 + i] = y[i]
        for i in range(nper):
            info[4 + i] += offs[i]


@njit(cache=True)
def integrate(kind, modes, coefs, vdat, trunc, t0, y0, t_out, rtol, atol,
              max_steps, Y, info):
    """Integrate from t0 and store the state at each t_out[j] into Y[j].

    t_out must be monotone in the integration direction.  Periodic
    coordinates are renormalized internally by integer shifts.
    info = [status, steps, t_last, max|y[1]|, y_last...]."""
    n = y0.shape[0]
    nper = _periodic_dims(kind)
    offs = np.zeros(nper)
    y = y0.copy()
    for i in range(nper):
        offs[i] = math.floor(y[i])
        y[i] -= offs[i]
    t = t0
    f = np.empty(n)
    st = rhs(kind, t, y, modes, coefs, vdat, trunc, f)
    info[0] = st
    info[1] = 0
    info[2] = t
    info[3] = abs(y0[1])
    if st != OK:
        return st
    nout = t_out.shape[0]
    if nout == 0:
        return OK
    direction = 1.0 if t_out[nout - 1] >= t0 else -1.0
    K = np.empty((_NST + 1, n))
    ynew = np.empty(n)
    fnew = np.empty(n)
    h = _initial_step(kind, t, y, f, direction, rtol, atol, modes, coefs, vdat, trunc)
    j = 0
    while j < nout and (t_out[j] - t) * direction <= 0.0:
        for i in range(n):
            Y[j, i] = y[i]
        for i in range(nper):
            Y[j, i] += offs[i]
        j += 1
    steps = 0
    while j < nout:
        if steps >= max_steps:
            info[0] = MAX_STEPS
            _save_state(info, y, offs, nper, t)
            return MAX_STEPS
        target = t_out[j]
        min_h = 10.0 * abs(math.nextafter(t, direction * np.inf) - t)
        if h < min_h:
            info[0] = STEP_UNDERFLOW
            _save_state(info, y, offs, nper, t)
            return STEP_UNDERFLOW
        hh = h
        land = False
        if (t + direction * hh - target) * direction >= 0.0:
            hh = abs(target - t)
            land = True
        st = _rk_step(kind, t, y, f, direction * hh, modes, coefs, vdat, trunc, K, ynew, fnew)
        if st != OK:
            h = 0.5 * hh
            if h < min_h:
                info[0] = st
                _save_state(info, y, offs, nper, t)
                return st
            continue
        en = _err_norm(K, hh, y, ynew, rtol, atol)
        if en < 1.0:
            if en == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, 0.9 * en ** (-1.0 / 8.0))
            t = target if land else t + direction * hh
            for i in range(n):
                y[i] = ynew[i]
                f[i] = fnew[i]
            for i in range(nper):
                sh = math.floor(y[i])
                if sh != 0.0:
                    y[i] -= sh
                    offs[i] += sh
            if abs(y[1]) > info[3] and kind != GEODESIC:
                info[3] = abs(y[1])
            h = max(h, hh * fac) if land else hh * fac
            steps += 1
            while j < nout and (t_out[j] - t) * direction <= 0.0:
                for i in range(n):
                    Y[j, i] = y[i]
                for i in range(nper):
                    Y[j, i] += offs[i]
                j += 1
        else:
            h = hh * max(0.2, 0.9 * en ** (-1.0 / 8.0))
    info[1] = steps
    info[2] = t
    return OK


@njit(cache=True, parallel=True)
def integrate_batch(kind, modes, coefs, vdat, trunc, t0, Y0, t_out, rtol, atol,
                    max_steps, Y, status, maxabs):
    for b in prange(Y0.shape[0]):
        info = np.zeros(4)
        status[b] = integrate(kind, modes, coefs, vdat, trunc, t0, Y0[b], t_out,
                              rtol, atol, max_steps, Y[b], info)
        maxabs[b] = info[3]


# --------------------------------------------------------------------------
# Geodesic flow to a section <x, v> = level, with crossing count
# --------------------------------------------------------------------------

@njit(cache=True)
def geodesic_to_level(modes, coefs, vdat, y0, rtol, atol, max_steps, graph_eps,
                      event_tol, out, info):
    """Integrate the unit-speed geodesic flow until <x, v> reaches vdat[2]*level.

    vdat = [v1, v2, |v|^2, level].  Counts crossings of the lifted lines
    <x, v> = k, k integer, strictly after the start.  Returns status;
    info = [status, steps, t_hit, crossings, min <w, v>, event residual]."""
    n = 4
    v1 = vdat[0]
    v2 = vdat[1]
    target = vdat[3]
    y = y0.copy()
    t = 0.0
    f = np.empty(n)
    rhs(GEODESIC, t, y, modes, coefs, vdat, vdat, f)
    K = np.empty((_NST + 1, n))
    ynew = np.empty(n)
    fnew = np.empty(n)
    h = _initial_step(GEODESIC, t, y, f, 1.0, rtol, atol, modes, coefs, vdat, vdat)
    g = y[0] * v1 + y[1] * v2
    # a start on a section line is not itself a crossing
    if abs(g - round(g)) < 1e-9:
        g = float(round(g))
    minw = y[2] * v1 + y[3] * v2
    crossings = 0
    info[0] = OK
    if minw < graph_eps:
        info[0] = NOT_A_GRAPH
        info[4] = minw
        return NOT_A_GRAPH
    steps = 0
    while True:
        if steps >= max_steps:
            info[0] = MAX_STEPS
            return MAX_STEPS
        if h < 1e-14:
            info[0] = STEP_UNDERFLOW
            return STEP_UNDERFLOW
        _rk_step(GEODESIC, t, y, f, h, modes, coefs, vdat, vdat, K, ynew, fnew)
        en = _err_norm(K, h, y, ynew, rtol, atol)
        if en >= 1.0:
            h = h * max(0.2, 0.9 * en ** (-1.0 / 8.0))
            continue
        steps += 1
        gn = ynew[0] * v1 + ynew[1] * v2
        wv = ynew[2] * v1 + ynew[3] * v2
        if wv < minw:
            minw = wv
        if wv < graph_eps:
            info[0] = NOT_A_GRAPH
            info[2] = t + h
            info[4] = minw
            for i in range(n):
                out[i] = ynew[i]
            return NOT_A_GRAPH
        if gn >= target:
            # integer levels in (g, target]
            crossings += int(math.floor(target) - math.floor(g))
            # Hermite guess, then Newton on exact partial steps
            tau = _hermite_root(g - target, gn - target, y[2] * v1 + y[3] * v2, wv, h)
            lo = 0.0
            hi = h
            yt = np.empty(n)
            ft = np.empty(n)
            Kt = np.empty((_NST + 1, n))
            res = 0.0
            for _ in range(60):
                if tau <= 0.0:
                    for i in range(n):
                        yt[i] = y[i]
                else:
                    _rk_step(GEODESIC, t, y, f, tau, modes, coefs, vdat, vdat, Kt, yt, ft)
                res = yt[0] * v1 + yt[1] * v2 - target
                if abs(res) <= event_tol:
                    break
                if res > 0.0:
                    hi = tau
                else:
                    lo = tau
                dg = yt[2] * v1 + yt[3] * v2
                tn = tau - res / dg
                if not (lo < tn < hi):
                    tn = 0.5 * (lo + hi)
                tau = tn
            for i in range(n):
                out[i] = yt[i]
            info[1] = steps
            info[2] = t + tau
            info[3] = crossings
            info[4] = minw
            info[5] = res
            return OK
        crossings += int(math.floor(gn) - math.floor(g))
        en = max(en, 1e-300)
        fac = min(10.0, 0.9 * en ** (-1.0 / 8.0))
        t += h
        for i in range(n):
            y[i] = ynew[i]
            f[i] = fnew[i]
        g = gn
        h = h * fac


@njit(cache=True)
def _hermite_root(a0, a1, d0, d1, h):
    """Root in [0, h] of the cubic Hermite interpolant of values a0 < 0 <= a1
    with slopes d0, d1; bisection on the cubic."""
    lo = 0.0
    hi = h
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        s = mid / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        val = h00 * a0 + h10 * h * d0 + h01 * a1 + h11 * h * d1
        if val > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Pointwise vector wrappers
# --------------------------------------------------------------------------

@njit(cache=True)
def lag_eval_many(t, x, r, modes, coefs, vdat, trunc, out):
    tmp = np.empty(9)
    for i in range(t.shape[0]):
        lag_eval(t[i], x[i], r[i], modes, coefs, vdat, trunc, tmp)
        for j in range(9):
            out[i, j] = tmp[j]


@njit(cache=True)
def metric_eval_many(x1, x2, w1, w2, modes, coefs, out):
    tmp = np.empty(15)
    for i in range(x1.shape[0]):
        metric_eval(x1[i], x2[i], w1[i], w2[i], modes, coefs, tmp)
        for j in range(15):
            out[i, j] = tmp[j]


@njit(cache=True)
def fields_many(q1, q2, modes, coefs, val, grad, hess):
    v = np.empty(3)
    g = np.empty((3, 2))
    h = np.empty((3, 3))
    for i in range(q1.shape[0]):
        fields(q1[i], q2[i], modes, coefs, v, g, h)
        for f in range(3):
            val[i, f] = v[f]
            grad[i, f, 0] = g[f, 0]
            grad[i, f, 1] = g[f, 1]
            hess[i, f, 0] = h[f, 0]
            hess[i, f, 1] = h[f, 1]
            hess[i, f, 2] = h[f, 2]


@njit(cache=True)
def basis_many(r, trunc, out):
    tmp = np.empty(12)
    for i in range(r.shape[0]):
        basis(r[i], trunc, tmp)
        for j in range(12):
            out[i, j] = tmp[j]


@njit(cache=True)
def legendre_inv_many(t, x, p, modes, coefs, vdat, trunc, tol, r, status):
    for i in range(t.shape[0]):
        r[i], status[i] = legendre_inv(t[i], x[i], p[i], modes, coefs, vdat, trunc, tol)
