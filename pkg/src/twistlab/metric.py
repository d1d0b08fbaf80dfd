"""Randers-plus-conformal Finsler metrics on the 2-torus.

    F(x, w) = exp(u(x)) |w| + b1(x) w1 + b2(x) w2

with u, b1, b2 finite real Fourier series in x = (x1, x2), lifted
Z^2-periodically to the plane.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K

FIELDS = ("u", "b1", "b2")
MIN_SPEED = 1e-12


class InvalidInput(ValueError):
    pass


class IntegrationError(RuntimeError):
    """Integrator failure; ``last_state`` holds the last good state if known."""

    def __init__(self, message, last_state=None, status=None):
        super().__init__(message)
        self.last_state = last_state
        self.status = status


_STATUS_TEXT = {
    K.STEP_UNDERFLOW: "step size underflow",
    K.MAX_STEPS: "step budget exhausted",
    K.LEGENDRE_FAIL: "Legendre inversion failed",
    K.NOT_A_GRAPH: "graph condition lost",
}


def status_text(code):
    return _STATUS_TEXT.get(int(code), f"status {int(code)}")


@dataclass(frozen=True)
class MetricSpec:
    """Fourier tables: ``{(k1, k2): (cos_coeff, sin_coeff)}`` per field."""

    conformal_coeffs: dict = field(default_factory=dict)
    oneform_coeffs: tuple = (None, None)

    def __post_init__(self):
        b1, b2 = self.oneform_coeffs
        object.__setattr__(self, "conformal_coeffs", _clean(self.conformal_coeffs))
        object.__setattr__(self, "oneform_coeffs", (_clean(b1), _clean(b2)))
        tables = (self.conformal_coeffs,) + self.oneform_coeffs
        modes = sorted({k for t in tables for k in t})
        if not modes:
            modes = [(0, 0)]
        coefs = np.zeros((3, len(modes), 2))
        for f, t in enumerate(tables):
            for j, k in enumerate(modes):
                if k in t:
                    coefs[f, j] = t[k]
        m = np.array(modes, dtype=float).reshape(-1, 2)
        m.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "_modes", m)
        object.__setattr__(self, "_coefs", coefs)

    # constructors ---------------------------------------------------------

    @classmethod
    def flat(cls):
        return cls()

    @classmethod
    def conformal(cls, eps, k=(0, 1)):
        """u = eps cos(2 pi k.x)."""
        return cls({tuple(k): (eps, 0.0)})

    @classmethod
    def randers_constant(cls, b):
        return cls({}, ({(0, 0): (b[0], 0.0)}, {(0, 0): (b[1], 0.0)}))

    # properties -----------------------------------------------------------

    @property
    def modes(self):
        return self._modes

    @property
    def coefs(self):
        return self._coefs

    @property
    def is_flat(self):
        return not np.any(self._coefs)

    @property
    def reversible(self):
        return not any(self.oneform_coeffs)

    def __eq__(self, other):
        if not isinstance(other, MetricSpec):
            return NotImplemented
        return (self.conformal_coeffs == other.conformal_coeffs
                and self.oneform_coeffs == other.oneform_coeffs)

    def __hash__(self):
        return hash((tuple(sorted(self.conformal_coeffs.items())),
                     tuple(tuple(sorted(t.items())) for t in self.oneform_coeffs)))

    # evaluation -----------------------------------------------------------

    def fields(self, x):
        """Values, gradients and Hessians (h11, h12, h22) of (u, b1, b2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        val = np.empty((n, 3))
        grad = np.empty((n, 3, 2))
        hess = np.empty((n, 3, 3))
        K.fields_many(np.ascontiguousarray(x[:, 0]), np.ascontiguousarray(x[:, 1]),
                      self._modes, self._coefs, val, grad, hess)
        return val, grad, hess

    def F(self, x, w):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = np.atleast_2d(np.asarray(w, dtype=float))
        x, w = np.broadcast_arrays(x, w)
        val, _, _ = self.fields(x)
        out = np.exp(val[:, 0]) * np.hypot(w[:, 0], w[:, 1]) + val[:, 1] * w[:, 0] + val[:, 2] * w[:, 1]
        return out


def _clean(table):
    if not table:
        return {}
    out = {}
    for k, cs in table.items():
        k = (int(k[0]), int(k[1]))
        c, s = (float(cs[0]), float(cs[1])) if np.ndim(cs) else (float(cs), 0.0)
        if c or s:
            prev = out.get(k, (0.0, 0.0))
            out[k] = (prev[0] + c, prev[1] + s)
    return out


@dataclass(frozen=True)
class TangentState:
    position: tuple
    velocity: tuple

    def __post_init__(self):
        p = tuple(float(a) for a in self.position)
        v = tuple(float(a) for a in self.velocity)
        if len(p) != 2 or len(v) != 2:
            raise InvalidInput("position and velocity must be 2-vectors")
        if math.hypot(*v) < MIN_SPEED:
            raise InvalidInput("velocity must be nonzero")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)

    def check_unit(self, spec, tol=1e-9):
        F = metric_value(spec, self)
        if abs(F - 1.0) > tol:
            raise InvalidInput(f"state is not unit speed: F = {F!r}")
        return self

    def as_array(self):
        return np.array(self.position + self.velocity)


@dataclass(frozen=True)
class MetricEval:
    F: float
    dF_dx: np.ndarray
    dF_dw: np.ndarray
    d2F_dw2: np.ndarray
    d2F_dxdw: np.ndarray  # [i, j] = d/dx_j dF/dw_i
    g: np.ndarray  # Hessian of F^2/2 in w


def eval_metric(spec, state):
    """F and its derivatives at a tangent vector."""
    x1, x2 = state.position
    w1, w2 = state.velocity
    if math.hypot(w1, w2) < MIN_SPEED:
        raise InvalidInput("zero velocity")
    out = np.empty(15)
    K.metric_eval(x1, x2, w1, w2, spec.modes, spec.coefs, out)
    return MetricEval(
        F=float(out[0]),
        dF_dx=out[1:3].copy(),
        dF_dw=out[3:5].copy(),
        d2F_dw2=np.array([[out[5], out[6]], [out[6], out[7]]]),
        d2F_dxdw=np.array([[out[8], out[9]], [out[10], out[11]]]),
        g=np.array([[out[12], out[13]], [out[13], out[14]]]),
    )


def metric_value(spec, state):
    return eval_metric(spec, state).F


def metric_eval_arrays(spec, x, w):
    """Vectorized raw evaluation; columns as in ``_kernels.metric_eval``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    x, w = np.broadcast_arrays(x, w)
    if np.any(np.hypot(w[:, 0], w[:, 1]) < MIN_SPEED):
        raise InvalidInput("zero velocity")
    out = np.empty((x.shape[0], 15))
    K.metric_eval_many(np.ascontiguousarray(x[:, 0]), np.ascontiguousarray(x[:, 1]),
                       np.ascontiguousarray(w[:, 0]), np.ascontiguousarray(w[:, 1]),
                       spec.modes, spec.coefs, out)
    return out


def deck_shift(state, z):
    z = (int(z[0]), int(z[1]))
    return TangentState((state.position[0] + z[0], state.position[1] + z[1]), state.velocity)


# --------------------------------------------------------------------------
# convexity audit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridPlan:
    nx: int = 32
    nangles: int = 32
    threshold: float = 1e-8


@dataclass
class ConvexityReport:
    min_eigenvalue: float
    argmin: tuple  # (x1, x2, theta)
    randers_margin: float
    randers_argmin: tuple
    threshold: float
    passed: bool


def convexity_audit(spec, grid=GridPlan()):
    if grid.nx < 1 or grid.nangles < 1:
        raise InvalidInput("empty grid")
    s = np.arange(grid.nx) / grid.nx
    ang = 2 * np.pi * np.arange(grid.nangles) / grid.nangles
    X1, X2, TH = np.meshgrid(s, s, ang, indexing="ij")
    x = np.column_stack([X1.ravel(), X2.ravel()])
    w = np.column_stack([np.cos(TH.ravel()), np.sin(TH.ravel())])
    out = metric_eval_arrays(spec, x, w)
    g11, g12, g22 = out[:, 12], out[:, 13], out[:, 14]
    tr = 0.5 * (g11 + g22)
    lam = tr - np.sqrt((0.5 * (g11 - g22)) ** 2 + g12 ** 2)
    i = int(np.argmin(lam))
    xs = np.column_stack([X1[:, :, 0].ravel(), X2[:, :, 0].ravel()])
    val, _, _ = spec.fields(xs)
    ratio = np.exp(-val[:, 0]) * np.hypot(val[:, 1], val[:, 2])
    j = int(np.argmax(ratio))
    return ConvexityReport(
        min_eigenvalue=float(lam[i]),
        argmin=(float(x[i, 0]), float(x[i, 1]), float(TH.ravel()[i])),
        randers_margin=float(1.0 - ratio[j]),
        randers_argmin=(float(xs[j, 0]), float(xs[j, 1])),
        threshold=grid.threshold,
        passed=bool(lam[i] >= grid.threshold and ratio[j] < 1.0),
    )


# --------------------------------------------------------------------------
# geodesic flow
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # columns x1, x2, w1, w2
    F: np.ndarray

    @property
    def drift(self):
        return float(np.max(np.abs(self.F - self.F[0])))

    def at(self, i):
        s = self.states[i]
        return TangentState((s[0], s[1]), (s[2], s[3]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "x1", "x2", "w1", "w2", "F"])
            for t, s, f in zip(self.t, self.states, self.F):
                wr.writerow([repr(float(t))] + [repr(float(a)) for a in s] + [repr(float(f))])


def geodesic_flow(spec, start, duration, tol=1e-10, times=None, max_steps=10_000_000,
                  unit_tol=1e-8):
    """Integrate the geodesic flow (Euler-Lagrange flow of F^2/2).

    ``times`` are the sample times (default: 0 and ``duration``)."""
    start.check_unit(spec, unit_tol)
    if times is None:
        times = np.array([0.0, float(duration)])
    times = np.asarray(times, dtype=float)
    Y = np.empty((times.size, 4))
    info = np.zeros(8)
    st = K.integrate(K.GEODESIC, spec.modes, spec.coefs, np.zeros(4), np.zeros(K.TRUNC_SIZE),
                     0.0, start.as_array(), times, tol, tol, max_steps, Y, info)
    if st != K.OK:
        raise IntegrationError(f"geodesic flow: {status_text(st)} at t={info[2]!r}",
                               last_state=(float(info[2]), info[4:8].copy()), status=st)
    F = metric_eval_arrays(spec, Y[:, :2], Y[:, 2:])[:, 0]
    return Trajectory(times, Y, F)


# --------------------------------------------------------------------------
# spec file I/O
# --------------------------------------------------------------------------

class SpecFormatError(ValueError):
    def __init__(self, message, line=None, column=None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.line = line
        self.column = column


def parse_metric_spec(text):
    tables = {f: {} for f in FIELDS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if "=" not in line:
            raise SpecFormatError("expected 'key = value'", lineno, 1)
        key, value = line.split("=", 1)
        col = len(raw) - len(raw.lstrip()) + 1
        parts = key.strip().split(".")
        if len(parts) != 4 or parts[0] not in FIELDS or parts[3] not in ("cos", "sin"):
            raise SpecFormatError(f"bad key {key.strip()!r}", lineno, col)
        try:
            k = (int(parts[1]), int(parts[2]))
        except ValueError:
            raise SpecFormatError(f"bad mode index in {key.strip()!r}", lineno, col) from None
        try:
            c = float(value)
        except ValueError:
            raise SpecFormatError(f"bad number {value.strip()!r}", lineno, line.index("=") + 2) from None
        cur = tables[parts[0]].get(k, (0.0, 0.0))
        cur = (cur[0] + c, cur[1]) if parts[3] == "cos" else (cur[0], cur[1] + c)
        tables[parts[0]][k] = cur
    return MetricSpec(tables["u"], (tables["b1"], tables["b2"]))


def load_metric_spec(path):
    return parse_metric_spec(Path(path).read_text())


def format_metric_spec(spec):
    lines = []
    for name, table in zip(FIELDS, (spec.conformal_coeffs,) + spec.oneform_coeffs):
        for k in sorted(table):
            c, s = table[k]
            if c:
                lines.append(f"{name}.{k[0]}.{k[1]}.cos = {c!r}")
            if s:
                lines.append(f"{name}.{k[0]}.{k[1]}.sin = {s!r}")
    return "\n".join(lines) + ("\n" if lines else "")
