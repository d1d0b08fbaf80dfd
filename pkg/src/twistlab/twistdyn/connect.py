"""Search for orbits passing close to both boundary circles of a band."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..metric import IntegrationError, InvalidInput
from .circles import graph_distance
from .maps import OrbitEscape
from .scan import InstabilityBand


class ConnectionFailure(RuntimeError):
    pass


@dataclass
class ConnectionCandidate:
    seed: tuple
    M_plus: int
    M_minus: int
    delta_plus: float
    delta_minus: float
    k_plus: int  # forward iterate realizing delta_plus
    k_minus: int  # backward iterate realizing delta_minus
    forward: np.ndarray  # (M_plus + 1, 2), forward[0] = seed
    backward: np.ndarray  # (M_minus + 1, 2), backward[k] = f^{-k}(seed)

    @property
    def score(self):
        return (self.delta_plus + self.delta_minus, self.delta_plus)

    def orbit(self):
        """Whole record in time order: f^{-M_minus}(seed) .. f^{M_plus}(seed)."""
        return np.concatenate([self.backward[:0:-1], self.forward])

    def report(self, orbit_csv_path=None):
        return {
            "seed": list(self.seed),
            "delta_plus": self.delta_plus,
            "delta_minus": self.delta_minus,
            "approach_steps": [self.k_plus, -self.k_minus],
            "M_plus": self.M_plus,
            "M_minus": self.M_minus,
            "orbit_csv_path": orbit_csv_path,
        }

    def to_json(self, orbit_csv_path=None):
        return json.dumps(self.report(orbit_csv_path), indent=1, sort_keys=True)


def approach(band, forward, backward):
    """(delta_plus, k_plus, delta_minus, k_minus) from an orbit record."""
    dp = graph_distance(band.gamma_plus.samples, forward[:, 0], forward[:, 1])
    dm = graph_distance(band.gamma_minus.samples, backward[:, 0], backward[:, 1])
    kp = int(np.argmin(dp))
    km = int(np.argmin(dm))
    return float(dp[kp]), kp, float(dm[km]), km


def _candidates(fmap, band, xs, ys, M_plus, M_minus):
    Xf, Yf = fmap.orbits(xs, ys, M_plus)
    Xb, Yb = fmap.orbits(xs, ys, M_minus, direction=-1)
    out = []
    for k in range(len(xs)):
        try:
            fmap.check_tube(Yf[k])
            fmap.check_tube(Yb[k])
        except OrbitEscape:
            continue
        fw = np.column_stack([Xf[k], Yf[k]])
        bw = np.column_stack([Xb[k], Yb[k]])
        dp, kp, dm, km = approach(band, fw, bw)
        out.append(ConnectionCandidate((float(xs[k]), float(ys[k])), M_plus, M_minus,
                                       dp, dm, kp, km, fw, bw))
    return out


def connect_search(fmap, band, seeds=None, M_plus=10_000, M_minus=10_000, refine=False,
                   refine_width=0.05, refine_iter=20):
    """Best seed by (delta_plus + delta_minus, delta_plus), optionally refined in x."""
    if not isinstance(band, InstabilityBand):
        raise InvalidInput("connect_search needs an instability band")
    if seeds is None:
        seeds = [c.seed for c in band.interior]
    seeds = list(seeds)
    if not seeds:
        raise ConnectionFailure("no seeds to search")
    xs = np.array([s[0] for s in seeds], dtype=float)
    ys = np.array([s[1] for s in seeds], dtype=float)
    try:
        cands = _candidates(fmap, band, xs, ys, M_plus, M_minus)
    except IntegrationError as e:
        raise ConnectionFailure(f"orbit integration failed: {e}") from e
    if not cands:
        raise ConnectionFailure("all seed orbits left the tube")
    best = min(cands, key=lambda c: c.score)
    if refine:
        y0 = best.seed[1]
        found = {}

        def score(x):
            try:
                c = _candidates(fmap, band, np.array([x]), np.array([y0]), M_plus, M_minus)
            except IntegrationError:
                c = []
            if not c:
                return np.inf
            found[x] = c[0]
            return c[0].score[0]

        x0 = best.seed[0]
        minimize_scalar(score, bounds=(x0 - refine_width, x0 + refine_width), method="bounded",
                        options={"maxiter": refine_iter, "xatol": 1e-6})
        for c in found.values():
            if c.score < best.score:
                best = c
    return best
