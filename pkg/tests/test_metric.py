import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistlab.metric import (GridPlan, IntegrationError, InvalidInput, MetricSpec, SpecFormatError,
                             TangentState, convexity_audit, deck_shift, eval_metric,
                             format_metric_spec, geodesic_flow, metric_eval_arrays, metric_value,
                             parse_metric_spec)

coord = st.floats(-3.0, 3.0, allow_nan=False)
comp = st.floats(-2.0, 2.0, allow_nan=False)

RANDERS = MetricSpec({(1, 0): (0.2, 0.1), (0, 1): (0.0, -0.15)},
                     ({(0, 1): (0.1, 0.0)}, {(1, 1): (0.0, 0.08)}))


def unit(spec, x, theta):
    w = np.array([math.cos(theta), math.sin(theta)])
    F = metric_value(spec, TangentState(x, w))
    return TangentState(x, tuple(w / F))


def test_flat_euclidean_norm(flat):
    assert metric_value(flat, TangentState((0, 0), (3, 4))) == 5.0


def test_constant_oneform():
    spec = MetricSpec.randers_constant((0.3, 0.0))
    assert metric_value(spec, TangentState((0, 0), (1, 0))) == pytest.approx(1.3, abs=1e-15)


def test_zero_velocity_rejected(flat):
    with pytest.raises(InvalidInput):
        TangentState((0, 0), (0, 0))
    with pytest.raises(InvalidInput):
        metric_eval_arrays(flat, [[0, 0]], [[0, 1e-13]])


@given(coord, coord, comp, comp, st.floats(0.01, 50.0))
def test_homogeneity(x1, x2, w1, w2, lam):
    if math.hypot(w1, w2) < 1e-6:
        return
    F1 = metric_value(RANDERS, TangentState((x1, x2), (w1, w2)))
    F2 = metric_value(RANDERS, TangentState((x1, x2), (lam * w1, lam * w2)))
    assert F2 == pytest.approx(lam * F1, rel=1e-13, abs=1e-14)


@given(coord, coord, comp, comp, st.integers(-5, 5), st.integers(-5, 5))
def test_periodicity(x1, x2, w1, w2, z1, z2):
    if math.hypot(w1, w2) < 1e-6:
        return
    a = metric_value(RANDERS, TangentState((x1, x2), (w1, w2)))
    b = metric_value(RANDERS, TangentState((x1 + z1, x2 + z2), (w1, w2)))
    assert b == pytest.approx(a, rel=1e-12, abs=1e-13)


@given(coord, coord, comp, comp)
def test_reversible_when_no_oneform(x1, x2, w1, w2):
    spec = MetricSpec({(1, 2): (0.3, -0.2)})
    assert spec.reversible
    if math.hypot(w1, w2) < 1e-6:
        return
    a = metric_value(spec, TangentState((x1, x2), (w1, w2)))
    b = metric_value(spec, TangentState((x1, x2), (-w1, -w2)))
    assert a == pytest.approx(b, rel=1e-14)
    assert not RANDERS.reversible


def _num_derivs(spec, x, w, h):
    def F(x, w):
        return metric_value(spec, TangentState(tuple(x), tuple(w)))

    e = np.eye(2)
    dx = np.array([(F(x + h * e[i], w) - F(x - h * e[i], w)) / (2 * h) for i in range(2)])
    dw = np.array([(F(x, w + h * e[i]) - F(x, w - h * e[i])) / (2 * h) for i in range(2)])

    def L(w):
        return 0.5 * F(x, w) ** 2

    g = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            g[i, j] = (L(w + h * e[i] + h * e[j]) - L(w + h * e[i] - h * e[j])
                       - L(w - h * e[i] + h * e[j]) + L(w - h * e[i] - h * e[j])) / (4 * h * h)
    return dx, dw, g


def test_derivatives_match_central_differences():
    x = np.array([0.31, -0.72])
    w = np.array([0.8, -0.45])
    ev = eval_metric(RANDERS, TangentState(tuple(x), tuple(w)))
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        dx, dw, g = _num_derivs(RANDERS, x, w, h)
        errs.append(max(np.abs(dx - ev.dF_dx).max(), np.abs(dw - ev.dF_dw).max(), np.abs(g - ev.g).max()))
    assert errs[-1] < 1e-4
    order = math.log(errs[0] / errs[1]) / math.log(2)
    assert order >= 1.9


def test_mixed_derivative_matches_differences():
    x = np.array([0.11, 0.4])
    w = np.array([-0.3, 0.9])
    ev = eval_metric(RANDERS, TangentState(tuple(x), tuple(w)))
    h = 1e-5
    for j in range(2):
        e = np.eye(2)[j]
        dp = eval_metric(RANDERS, TangentState(tuple(x + h * e), tuple(w))).dF_dw
        dm = eval_metric(RANDERS, TangentState(tuple(x - h * e), tuple(w))).dF_dw
        assert np.allclose((dp - dm) / (2 * h), ev.d2F_dxdw[:, j], atol=1e-8)


def test_convexity_audit_flat(flat):
    rep = convexity_audit(flat, GridPlan(8, 16))
    assert rep.min_eigenvalue == pytest.approx(1.0, abs=1e-12)
    assert rep.passed


def test_convexity_audit_randers_margins():
    rep = convexity_audit(MetricSpec.randers_constant((0.3, 0.0)), GridPlan(4, 32))
    assert rep.randers_margin == pytest.approx(0.7, abs=1e-12)
    assert rep.passed
    bad = convexity_audit(MetricSpec.randers_constant((1.2, 0.0)), GridPlan(4, 32))
    assert bad.randers_margin < 0
    assert not bad.passed


def test_convexity_audit_empty_grid(flat):
    with pytest.raises(InvalidInput):
        convexity_audit(flat, GridPlan(0, 4))


def test_flat_geodesics_are_lines(flat):
    tr = geodesic_flow(flat, TangentState((0, 0), (1, 0)), 1.0)
    assert np.allclose(tr.states[-1], [1, 0, 1, 0], atol=1e-14)
    tr = geodesic_flow(flat, TangentState((0, 0), (0.6, 0.8)), 5.0)
    assert np.allclose(tr.states[-1, :2], [3, 4], atol=1e-12)


def test_non_unit_start_rejected(flat):
    with pytest.raises(InvalidInput):
        geodesic_flow(flat, TangentState((0, 0), (2, 0)), 1.0)


def test_conformal_F_conservation(conformal005):
    start = unit(conformal005, (0.1, 0.2), 0.7)
    tol = 1e-11
    tr = geodesic_flow(conformal005, start, 100.0, tol=tol, times=np.linspace(0, 100, 401))
    assert tr.drift <= 1e-8
    assert tr.drift <= 10 * tol * 100 + 1e-12


def test_randers_F_conservation():
    start = unit(RANDERS, (0.3, 0.1), 2.1)
    tr = geodesic_flow(RANDERS, start, 20.0, tol=1e-11, times=np.linspace(0, 20, 81))
    assert tr.drift <= 10 * 1e-11 * 20


def test_deck_shift():
    s = TangentState((0.2, 0.7), (1, 0))
    assert deck_shift(s, (1, 0)) == TangentState((1.2, 0.7), (1, 0))
    assert deck_shift(s, (0, 0)) == s


@given(st.integers(-3, 3), st.integers(-3, 3), st.floats(0, 2 * math.pi))
def test_flow_equivariance(z1, z2, theta):
    s = unit(RANDERS, (0.25, -0.4), theta)
    a = geodesic_flow(RANDERS, deck_shift(s, (z1, z2)), 3.0).at(-1)
    b = deck_shift(geodesic_flow(RANDERS, s, 3.0).at(-1), (z1, z2))
    assert np.allclose(a.as_array(), b.as_array(), atol=1e-8)


def test_reversible_retraces_path():
    spec = MetricSpec({(1, 1): (0.2, 0.05), (0, 1): (-0.1, 0.0)})
    s = unit(spec, (0.2, 0.3), 0.4)
    end = geodesic_flow(spec, s, 5.0, tol=1e-12).at(-1)
    back = TangentState(end.position, tuple(-np.array(end.velocity)))
    ret = geodesic_flow(spec, back, 5.0, tol=1e-12).at(-1)
    assert np.allclose(ret.position, s.position, atol=1e-8)
    assert np.allclose(ret.velocity, -np.array(s.velocity), atol=1e-8)


def test_integration_error_reports_last_state(conformal005):
    s = unit(conformal005, (0.0, 0.0), 0.3)
    with pytest.raises(IntegrationError) as e:
        geodesic_flow(conformal005, s, 50.0, max_steps=5)
    t, y = e.value.last_state
    assert 0 < t < 50 and y.shape == (4,)


def test_trajectory_csv(tmp_path, flat):
    tr = geodesic_flow(flat, TangentState((0, 0), (1, 0)), 1.0, times=np.linspace(0, 1, 3))
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,x1,x2,w1,w2,F"
    assert len(lines) == 4


def test_spec_file_round_trip():
    text = format_metric_spec(RANDERS)
    assert parse_metric_spec(text) == RANDERS


def test_spec_file_errors():
    with pytest.raises(SpecFormatError) as e:
        parse_metric_spec("u.0.1.cos = 0.1\nu.0.1.tan = 2\n")
    assert e.value.line == 2
    with pytest.raises(SpecFormatError):
        parse_metric_spec("u.0.1.cos = abc\n")
