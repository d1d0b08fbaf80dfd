"""Command line interface.

    twistlab verify     --config flat.cfg
    twistlab pipeline   --config instability.cfg --out run1
    twistlab export     run1 --format svg

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure or failed check.  ``report.json`` in the output directory lists the
checks and artifacts; wall-clock timings go to ``timings.txt`` so that the
JSON and CSV artifacts of repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import export as E
from .config import ConfigError, ExperimentConfig, load_config
from .hamiltonian import FactorizationError, HamiltonianSystem, LegendreError, factorize_time1
from .metric import IntegrationError, InvalidInput, MetricSpec, format_metric_spec
from .reduction import (GraphCurve, NotAGraph, PrimeDirection, TruncationError, action_length_check,
                        build_reduced, el_flow, geodesic_to_graph, truncate)
from .section import (SectionPoint, conjugacy_check, flat_return_closed_form, return_index,
                      return_map)
from .twistdyn import (ConnectionFailure, DetectParams, EulerLagrangeMap,
                       InstabilityBand, OrbitEscape, ShearMap, ShootingError, connect_search,
                       geodesic_reconstruct, rotation_number)
from .twistdyn.connect import approach

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

NUMERICAL_ERRORS = (IntegrationError, TruncationError, FactorizationError, LegendreError,
                    ShootingError, ConnectionFailure, NotAGraph, OrbitEscape, FloatingPointError)


class RunReport:
    def __init__(self, command, cfg, seed):
        self.command = command
        self.config_hash = cfg.hash
        self.seed = seed
        self.timings = {}
        self.checks = {}
        self.artifacts = []
        self.summary = {}
        self.failed_stage = None
        self.error = None

    def check(self, name, passed, **details):
        self.checks[name] = {"passed": bool(passed), **details}

    @property
    def passed(self):
        return self.failed_stage is None and all(c["passed"] for c in self.checks.values())

    def as_dict(self):
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "status": "ok" if self.passed else "failed",
            "failed_stage": self.failed_stage,
            "error": self.error,
            "checks": self.checks,
            "artifacts": sorted(set(self.artifacts)),
            "summary": self.summary,
        }


class Context:
    """State shared by the stages of one command."""

    def __init__(self, cfg: ExperimentConfig, out: Path, seed: int, report: RunReport):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.report = report
        self.rng = np.random.default_rng(seed)
        self.L = self.Lt = self.H = self.factorization = self.fmap = None
        self.scan = self.candidate = None

    def path(self, name):
        self.report.artifacts.append(name)
        return self.out / name

    def json(self, name, obj):
        E.write_json(self.path(name), obj)

    @property
    def v(self):
        return PrimeDirection(self.cfg.v)


# --------------------------------------------------------------------------
# verify: flat-metric oracle suite
# --------------------------------------------------------------------------

def _flat_truncated(cfg, v=None):
    L = build_reduced(MetricSpec.flat(), v or cfg.v)
    return truncate(L, cfg["reduction.R"], cfg["reduction.margin"])


def check_shear(ctx):
    Lt = _flat_truncated(ctx.cfg)
    fmap = EulerLagrangeMap(Lt, tol=ctx.cfg["reduction.tol"])
    x = np.repeat(np.arange(10) / 10, 10)
    y = np.tile(np.linspace(-1.0, 1.0, 10), 10)
    X, Y = fmap(x, y)
    Xs, Ys = ShearMap()(x, y)
    err = float(max(np.abs(X - Xs).max(), np.abs(Y - Ys).max()))
    ctx.report.check("shear", err <= 1e-9, max_error=err, points=int(x.size), tolerance=1e-9)


def _section_points(rng, v, n):
    d = PrimeDirection(v)
    base = math.atan2(d.v[1], d.v[0])
    ang = base + rng.uniform(-1.2, 1.2, n)
    s = rng.uniform(0.0, 1.0, n)
    pts = []
    for a, si in zip(ang, s):
        x = tuple(si * np.array(d.perp, dtype=float))
        pts.append(SectionPoint("V", 0, x, (math.cos(a), math.sin(a))))
    return pts


def check_return_map(ctx):
    spec = MetricSpec.flat()
    worst = 0.0
    per_v = {}
    for v in sorted({(1, 0), (1, 1), tuple(ctx.cfg.v)}):
        err = 0.0
        for p in _section_points(ctx.rng, v, 50):
            q, _ = return_map(spec, v, p, tol=ctx.cfg["section.tol"])
            xc, wc = flat_return_closed_form(v, p)
            err = max(err, float(np.max(np.abs(np.array(q.x + q.w) - np.array(xc + wc)))))
        per_v[f"{v[0]},{v[1]}"] = err
        worst = max(worst, err)
    ctx.report.check("return_map", worst <= 1e-8, max_error=worst, per_direction=per_v, tolerance=1e-8)


def _chart_grid(n, R):
    b = (np.arange(n) + 0.5) / n
    dd = np.linspace(-0.8 * R, 0.8 * R, n) if n > 1 else np.zeros(1)
    return [(bi, di) for bi in b for di in dd]


def check_conjugacy(ctx, spec=None, name="conjugacy"):
    spec = spec or MetricSpec.flat()
    L = build_reduced(spec, ctx.cfg.v)
    Lt = truncate(L, ctx.cfg["reduction.R"], ctx.cfg["reduction.margin"])
    n = ctx.cfg["section.grid"]
    rep = conjugacy_check(spec, ctx.cfg.v, Lt, _chart_grid(n, 1.0), tol=ctx.cfg["section.tol"])
    ctx.report.check(name, rep.max_dev <= 1e-6 and rep.excluded < rep.grid, max_dev=rep.max_dev,
                     mean_dev=rep.mean_dev, excluded=rep.excluded, grid=n, tolerance=1e-6)
    return rep


def check_pick(ctx):
    spec = MetricSpec.flat()
    counts = {}
    ok = True
    for v in sorted({(1, 0), (1, 1), (2, 1), tuple(ctx.cfg.v)}):
        d = PrimeDirection(v)
        w = np.array(d.v, dtype=float) / d.norm + 0.1 * np.array(d.perp, dtype=float) / d.norm
        w /= np.linalg.norm(w)
        p = SectionPoint("V", 0, (0.3 * d.perp[0], 0.3 * d.perp[1]), tuple(w))
        _, diag = return_map(spec, v, p, tol=ctx.cfg["section.tol"])
        counts[f"{v[0]},{v[1]}"] = [diag.crossings, return_index(v)]
        ok &= diag.crossings == return_index(v)
    ctx.report.check("pick", ok, crossings_vs_norm2=counts)


def check_legendre(ctx, Lt=None, name="legendre", n=1000):
    Lt = Lt or _flat_truncated(ctx.cfg)
    H = HamiltonianSystem(Lt)
    t = ctx.rng.uniform(0, 1, n)
    x = ctx.rng.uniform(0, 1, n)
    r = ctx.rng.uniform(-Lt.R_out - 1.0, Lt.R_out + 1.0, n)
    p = H.legendre(t, x, r)
    rt = float(np.max(np.abs(H.legendre_inverse(t, x, p) - r)))
    # tail: H = p^2 / (2D) where chi = 0
    pt = np.concatenate([np.linspace(H.p_tail, H.p_tail + 5.0, 50), -np.linspace(H.p_tail, H.p_tail + 5.0, 50)])
    tt = ctx.rng.uniform(0, 1, pt.size)
    xt = ctx.rng.uniform(0, 1, pt.size)
    tail = float(np.max(np.abs(H(tt, xt, pt) - pt ** 2 / (2 * H.D)) / (pt ** 2 / (2 * H.D))))
    ok = rt <= 1e-10 and tail <= 1e-14
    ctx.report.check(name, ok, roundtrip_error=rt, tail_relative_error=tail, points=n,
                     tolerance=1e-10)


def check_action_length(ctx, spec=None, name="action_length"):
    spec = spec or MetricSpec.flat()
    d = PrimeDirection(ctx.cfg.v)
    L = build_reduced(spec, d.v)
    worst = 0.0
    for _ in range(20):
        a0, a1, a2 = ctx.rng.normal(0, 0.3, 3)
        ph = ctx.rng.uniform(0, 2 * math.pi)

        def f(t, a0=a0, a1=a1, a2=a2, ph=ph):
            return a0 + a1 * t + a2 * np.sin(2 * math.pi * t + ph)

        def df(t, a1=a1, a2=a2, ph=ph):
            return a1 + 2 * math.pi * a2 * np.cos(2 * math.pi * t + ph)

        curve = GraphCurve.from_function(f, df, np.linspace(0.0, 1.0, 9), d)
        res = action_length_check(L, curve, 0.0, 1.0)
        worst = max(worst, res.relative_gap)
    ctx.report.check(name, worst <= 1e-8, max_relative_gap=worst, curves=20, tolerance=1e-8)


def check_truncation(ctx):
    Lt = _flat_truncated(ctx.cfg)
    r = np.linspace(-Lt.R, Lt.R, 201)
    inner = float(np.max(np.abs(Lt(0.3, 0.2, r) - Lt.inner(0.3, 0.2, r))))
    rt = np.linspace(Lt.R_out, Lt.R_out + 3.0, 50)
    tail = float(np.max(np.abs(Lt(0.3, 0.2, rt) - 0.5 * Lt.D * rt ** 2)))
    ok = Lt.audit.passed and inner <= 1e-13 and tail <= 1e-12
    ctx.report.check("truncation", ok, min_Lrr=Lt.audit.min_Lrr, C=Lt.C, D=Lt.D,
                     inner_error=inner, tail_error=tail)


VERIFY_CHECKS = {
    "shear": check_shear,
    "return_map": check_return_map,
    "conjugacy": check_conjugacy,
    "pick": check_pick,
    "legendre": check_legendre,
    "action_length": check_action_length,
    "truncation": check_truncation,
}


# --------------------------------------------------------------------------
# pipeline stages
# --------------------------------------------------------------------------

def stage_reduce(ctx):
    cfg = ctx.cfg
    ctx.L = build_reduced(cfg.metric, cfg.v)
    ctx.Lt = truncate(ctx.L, cfg["reduction.R"], cfg["reduction.margin"])
    a = ctx.Lt.audit
    ctx.json("truncation.json", {
        "v": list(cfg.v), "R": ctx.Lt.R, "margin": ctx.Lt.margin, "R_out": ctx.Lt.R_out,
        "D": ctx.Lt.D, "C": ctx.Lt.C, "min_Lrr": a.min_Lrr, "max_Lrr": a.max_Lrr,
        "argmin": list(a.argmin), "bump_margin": a.bump_margin, "passed": a.passed,
    })
    ctx.path("metric.txt").write_text(format_metric_spec(cfg.metric))
    ctx.report.check("truncation", a.passed, min_Lrr=a.min_Lrr, C=ctx.Lt.C, D=ctx.Lt.D)
    ctx.fmap = EulerLagrangeMap(ctx.Lt, tol=cfg["reduction.tol"])


def stage_profile(ctx):
    """Lagrangian profile at (t, x) = (0, 0) and a sample cylinder trajectory."""
    Lt = ctx.Lt
    r = np.linspace(-Lt.R_out - 1.0, Lt.R_out + 1.0, 161)
    dv = Lt.derivs(np.zeros_like(r), np.zeros_like(r), r)
    E.write_csv(ctx.path("lagrangian.csv"), ["r", "chi", "L", "L_r", "L_rr"],
                zip(r, Lt.chi(r), dv[:, 0], dv[:, 2], dv[:, 3]))
    x0, y0 = ctx.cfg["rotation.x"], ctx.cfg["rotation.y"]
    times = np.linspace(0.0, 10.0, 201)
    traj = el_flow(Lt, (x0, y0), 0.0, 10.0, tol=ctx.cfg["reduction.tol"], times=times)
    E.write_cylinder_csv(ctx.path("cylinder.csv"), traj.t, traj.x, traj.r)


def stage_factorize(ctx):
    cfg = ctx.cfg
    ctx.H = HamiltonianSystem(ctx.Lt)
    check_legendre(ctx, ctx.Lt, "legendre")
    f = factorize_time1(ctx.H, P=cfg["ham.P"], tol=cfg["ham.tol"], cap=cfg["ham.factor_cap"],
                        grid=cfg["ham.audit_grid"])
    ctx.factorization = f
    ctx.json("factorization.json", f.report())
    ok = all(a.passed for a in f.audits) and max(f.det_error) <= 1e-6
    ctx.report.check("twist", ok, n=f.n, min_twist=min(f.min_twist), det_error=max(f.det_error),
                     P=f.P)


def _params(cfg):
    return DetectParams(N=cfg["scan.N"], density=cfg["scan.density"],
                        lipschitz_max=cfg["scan.lipschitz_max"], rotation_tol=cfg["scan.rotation_tol"])


def stage_scan(ctx):
    cfg = ctx.cfg
    res, cands = _scan(ctx.fmap, cfg)
    ctx.scan = res
    rows = []
    for c in cands:
        rot = c.rotation
        w = c.witness
        rows.append((c.seed[0], c.seed[1], c.verdict,
                     rot.value if rot else float("nan"), rot.uncertainty if rot else float("nan"),
                     c.lipschitz, c.max_gap,
                     "" if w is None else f"{w.i};{w.j};{w.m}", c.note))
    E.write_csv(ctx.path("circles.csv"),
                ["seed_x", "seed_y", "verdict", "rotation", "rotation_uncertainty", "lipschitz",
                 "max_gap", "witness", "note"], rows)
    bad = [c.seed for c in cands if c.verdict == "refuted" and not c.witness.reproduce(
        ctx.fmap.orbit(c.seed[0], c.seed[1], max(c.witness.i, c.witness.j) + 1)[0])]
    ctx.report.check("witnesses", not bad, refuted=sum(c.verdict == "refuted" for c in cands),
                     not_reproduced=[list(s) for s in bad])
    counts = {}
    for c in cands:
        counts[c.verdict] = counts.get(c.verdict, 0) + 1
    ctx.report.summary["verdict_counts"] = dict(sorted(counts.items()))
    if isinstance(res, InstabilityBand):
        ctx.json("band.json", {"band": res.report()})
        ctx.report.summary["band"] = {"omega_minus": res.omega_minus, "omega_plus": res.omega_plus,
                                      "width": res.width,
                                      "irrational_up_to_Q": [res.scan_minus.irrational_up_to_Q,
                                                             res.scan_plus.irrational_up_to_Q]}
        ctx.report.check("band", res.omega_minus < res.omega_plus, omega_minus=res.omega_minus,
                         omega_plus=res.omega_plus, Q=res.Q,
                         irrational_up_to_Q=[res.scan_minus.irrational_up_to_Q,
                                             res.scan_plus.irrational_up_to_Q])
    else:
        ctx.json("band.json", res.report())
        ctx.report.summary["band"] = None
        ctx.report.summary["absence"] = res.reason
    ctx._cands = cands


def _scan(fmap, cfg):
    """Scan that also returns every classified candidate."""
    from .twistdyn.scan import classify_seeds, seed_grid, select_band

    xs, ys = seed_grid((cfg["scan.y_min"], cfg["scan.y_max"]), cfg["scan.levels"],
                       cfg["scan.seeds_per_level"])
    cands = classify_seeds(fmap, xs, ys, _params(cfg))
    return select_band(cands, cfg["scan.Q"]), cands


def stage_connect(ctx):
    if not isinstance(ctx.scan, InstabilityBand):
        ctx.report.summary["candidate"] = None
        return
    cfg = ctx.cfg
    band = ctx.scan
    seeds = [c.seed for c in band.interior]
    if cfg["connect.max_seeds"] is not None:
        seeds = seeds[:cfg["connect.max_seeds"]]
    cand = connect_search(ctx.fmap, band, seeds, M_plus=cfg["connect.M_plus"],
                          M_minus=cfg["connect.M_minus"], refine=cfg["connect.refine"])
    ctx.candidate = cand
    orbit = cand.orbit()
    E.write_orbit_csv(ctx.path("orbit.csv"), orbit[:, 0], orbit[:, 1], k0=-cand.M_minus)
    ctx.json("connection.json", cand.report("orbit.csv"))
    dp, kp, dm, km = approach(band, cand.forward, cand.backward)
    exact = dp == cand.delta_plus and dm == cand.delta_minus and kp == cand.k_plus and km == cand.k_minus
    ctx.report.check("delta_recompute", exact, delta_plus=cand.delta_plus,
                     delta_minus=cand.delta_minus, approach_steps=[cand.k_plus, -cand.k_minus])
    ctx.report.summary["candidate"] = {"seed": list(cand.seed), "delta_plus": cand.delta_plus,
                                       "delta_minus": cand.delta_minus,
                                       "relative_to_width": [cand.delta_plus / band.width,
                                                             cand.delta_minus / band.width]}


def stage_reconstruct(ctx):
    cand = ctx.candidate
    if cand is None:
        return
    cfg = ctx.cfg
    win = cfg["reconstruct.window"]
    k0 = max(-cand.k_minus, -win)
    k1 = max(min(cand.k_plus, win), k0 + 1)
    orbit = cand.orbit()[k0 + cand.M_minus:k1 + cand.M_minus + 1]
    spu = cfg["reconstruct.samples_per_unit"]
    track = geodesic_reconstruct(orbit, ctx.Lt, cfg.metric, cfg.v, band=ctx.scan, t0=k0,
                                 samples_per_unit=spu, tol=cfg["ham.tol"])
    track.to_csv(ctx.path("geodesic.csv"))
    # reduce the track back to the cylinder at integer times
    g = geodesic_to_graph(track.position[::spu], track.velocity[::spu], PrimeDirection(cfg.v))
    rt = float(max(np.abs(g.theta - orbit[:, 0]).max(), np.abs(g.dtheta - orbit[:, 1]).max()))
    ctx.json("reconstruct.json", {
        "steps": [k0, k1], "max_abs_r": track.max_abs_r, "el_residual": track.el_residual,
        "joint_mismatch": track.joint_mismatch, "dist_plus": track.dist_plus,
        "dist_minus": track.dist_minus, "F_drift": track.F_drift,
        "geodesic_deviation": track.geodesic_deviation, "round_trip": rt,
    })
    ok = rt <= 1e-7 and track.F_drift <= 1e-6 and track.el_residual <= 1e-6
    ctx.report.check("reconstruction", ok, round_trip=rt, F_drift=track.F_drift,
                     el_residual=track.el_residual, joint_mismatch=track.joint_mismatch)


def stage_portrait(ctx):
    cands = getattr(ctx, "_cands", [])
    series = []
    for verdict, style in (("graph-verified", "points"), ("refuted", "points"), ("indeterminate", "points")):
        xs, ys = [], []
        for c in cands:
            if c.verdict == verdict and c.orbit is not None:
                x, y = c.orbit
                xs.extend(x[:600])
                ys.extend(y[:600])
        if xs:
            series.append(E.portrait_series(verdict, xs, ys, style))
    band = ctx.scan
    if isinstance(band, InstabilityBand):
        for name, c in (("gamma_minus", band.gamma_minus), ("gamma_plus", band.gamma_plus)):
            series.append(E.portrait_series(name, c.samples[:, 0], c.samples[:, 1], "line", "#000000"))
    if ctx.candidate is not None:
        o = ctx.candidate.orbit()
        series.append(E.portrait_series("connection", o[:, 0], o[:, 1], "markers", "#ff7f0e"))
    cfg = ctx.cfg
    data = E.portrait(series, title=f"time-1 map, v=({cfg.v[0]},{cfg.v[1]})",
                      ylim=(cfg["scan.y_min"], cfg["scan.y_max"]))
    ctx.json("portrait.json", data)
    E.write_svg(ctx.path("portrait.svg"), data)


def stage_rotation(ctx):
    cfg = ctx.cfg
    seed = (cfg["rotation.x"], cfg["rotation.y"])
    est = rotation_number(ctx.fmap, seed, cfg["rotation.N"])
    ctx.json("rotation.json", {"seed": list(seed), "value": est.value, "uncertainty": est.uncertainty,
                               "N": est.N, "method": est.method, "partial": est.partial})
    ctx.report.summary["rotation"] = est.value
    ctx.report.check("rotation", not est.partial, value=est.value, uncertainty=est.uncertainty)


def stage_return_map(ctx):
    rep = check_conjugacy(ctx, ctx.cfg.metric, "conjugacy")
    E.write_csv(ctx.path("section.csv"), ["b", "d", "deviation"],
                ((b, dd, "" if e is None else e) for b, dd, e in rep.points))
    ctx.json("conjugacy.json", {"grid": rep.grid, "max_dev": rep.max_dev, "mean_dev": rep.mean_dev,
                                "excluded": rep.excluded})


# command -> ordered (stage name, function, checks it produces)
COMMANDS = {
    "reduce": [("reduce", stage_reduce, ("truncation",)), ("profile", stage_profile, ())],
    "return-map": [("return-map", stage_return_map, ("conjugacy",))],
    "twist-audit": [("reduce", stage_reduce, ("truncation",)),
                    ("factorize", stage_factorize, ("legendre", "twist"))],
    "rotation": [("reduce", stage_reduce, ("truncation",)), ("rotation", stage_rotation, ("rotation",))],
    "scan": [("reduce", stage_reduce, ("truncation",)), ("scan", stage_scan, ("witnesses", "band")),
             ("portrait", stage_portrait, ())],
    "connect": [("reduce", stage_reduce, ("truncation",)), ("scan", stage_scan, ("witnesses", "band")),
                ("connect", stage_connect, ("delta_recompute",)), ("portrait", stage_portrait, ())],
    "pipeline": [("reduce", stage_reduce, ("truncation",)),
                 ("factorize", stage_factorize, ("legendre", "twist")),
                 ("scan", stage_scan, ("witnesses", "band")),
                 ("connect", stage_connect, ("delta_recompute",)),
                 ("reconstruct", stage_reconstruct, ("reconstruction",)),
                 ("portrait", stage_portrait, ())],
}


def run_command(command, cfg, out, seed, only=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(command, cfg, seed)
    ctx = Context(cfg, out, seed, report)
    if command == "verify":
        names = list(VERIFY_CHECKS)
        if only is not None:
            if only not in VERIFY_CHECKS:
                raise ConfigError(f"unknown check {only!r} for verify (choose from {', '.join(names)})")
            names = [only]
        stages = [(n, VERIFY_CHECKS[n], (n,)) for n in names]
    else:
        stages = COMMANDS[command]
        if only is not None:
            known = [c for _, _, cs in stages for c in cs]
            if only not in known:
                raise ConfigError(f"unknown check {only!r} for {command} (choose from {', '.join(known)})")
            last = next(i for i, (_, _, cs) in enumerate(stages) if only in cs)
            stages = stages[:last + 1]
    for name, fn, _ in stages:
        t0 = time.perf_counter()
        try:
            fn(ctx)
        except NUMERICAL_ERRORS as e:
            report.failed_stage = name
            report.error = f"{type(e).__name__}: {e}"
            report.timings[name] = time.perf_counter() - t0
            break
        report.timings[name] = time.perf_counter() - t0
    if only is not None:
        report.checks = {k: v for k, v in report.checks.items() if k == only}
    E.write_json(out / "report.json", report.as_dict())
    with open(out / "timings.txt", "w") as fh:
        for k, v in report.timings.items():
            fh.write(f"{k} {v:.3f}\n")
    return report


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _threads():
    val = os.environ.get("TWISTLAB_THREADS")
    if val is None:
        return
    try:
        n = int(val)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"TWISTLAB_THREADS must be a positive integer, got {val!r}") from None
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _u64(s):
    try:
        v = int(s, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="twistlab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("verify", *COMMANDS):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment config file")
        s.add_argument("--out", help="output directory (default: output.dir from the config)")
        s.add_argument("--only", help="run a single check and the stages it depends on")
        s.add_argument("--seed", type=_u64, help="random seed (default: run.seed from the config)")
    s = sub.add_parser("export")
    s.add_argument("run_dir", nargs="?", help="directory of a previous run")
    s.add_argument("--out", help="same as run_dir")
    s.add_argument("--format", required=True, help="csv, json or svg")
    return p


def main(argv=None):
    warnings.filterwarnings("ignore", message=".*TBB.*")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        _threads()
        if args.command == "export":
            run_dir = args.run_dir or args.out
            if run_dir is None:
                raise ConfigError("export needs a run directory")
            if args.format not in E.FORMATS:
                raise ConfigError(f"unknown format {args.format!r} (choose from {', '.join(E.FORMATS)})")
            if not Path(run_dir).is_dir():
                raise ConfigError(f"run directory not found: {run_dir}")
            for f in E.export_run(run_dir, args.format):
                print(f)
            return EXIT_OK
        cfg = load_config(args.config)
        seed = cfg["run.seed"] if args.seed is None else args.seed
        out = args.out or cfg["output.dir"]
        report = run_command(args.command, cfg, out, seed, args.only)
    except (ConfigError, InvalidInput, FileNotFoundError) as e:
        print(f"twistlab: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for name, c in report.checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}")
    if report.failed_stage is not None:
        print(f"twistlab: stage {report.failed_stage} failed: {report.error}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if report.passed else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
