import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistlab.hamiltonian import HamiltonianSystem, factorize_time1
from twistlab.metric import MetricSpec
from twistlab.reduction import build_reduced, truncate
from twistlab.twistdyn import (GeneratingTable, LagrangianGenerating, ShearGenerating,
                               factor_generating, minimal_periodic_orbit)
from twistlab.twistdyn.minimal import action_gradient

_cache = {}


def flat_gen():
    if "flat" not in _cache:
        H = HamiltonianSystem(truncate(build_reduced(MetricSpec.flat(), (1, 0)), 2.0, 1.0))
        _cache["flat"] = LagrangianGenerating(H, 0.0, 1.0)
    return _cache["flat"]


def eps03():
    if "f03" not in _cache:
        H = HamiltonianSystem(truncate(build_reduced(MetricSpec.conformal(0.3), (1, 0)), 1.5, 3.0))
        f = factorize_time1(H, grid=16)
        _cache["f03"] = (f, [factor_generating(f, i) for i in range(f.n)])
    return _cache["f03"]


def two_mode_gen():
    if "two" not in _cache:
        spec = MetricSpec({(0, 1): (0.02, 0.0), (-1, 1): (0.02, 0.0)})
        H = HamiltonianSystem(truncate(build_reduced(spec, (1, 0)), 2.0, 1.0))
        _cache["two"] = LagrangianGenerating(H, 0.0, 1.0)
    return _cache["two"]


@given(st.floats(0, 1), st.floats(-1.5, 1.5))
def test_flat_generating_closed_form(x, delta):
    v = flat_gen().eval(x, x + delta)
    s = np.sqrt(1 + delta ** 2)
    assert v.h == pytest.approx(s, abs=1e-10)
    assert v.h2 == pytest.approx(delta / s, abs=1e-10)
    assert v.h1 == pytest.approx(-delta / s, abs=1e-10)
    assert v.h22 == pytest.approx(s ** -3, rel=1e-7)
    assert v.h12 == pytest.approx(-s ** -3, rel=1e-7)


@given(st.floats(0, 1), st.floats(-1.2, 1.2))
def test_generating_derivative_identities(x, delta):
    """d2 h equals the arrival momentum, d1 h minus the departure momentum."""
    g = two_mode_gen()
    xp = x + delta
    v = g.eval(x, xp)
    h = 1e-5
    d2 = (g.eval(x, xp + h).h - g.eval(x, xp - h).h) / (2 * h)
    d1 = (g.eval(x + h, xp).h - g.eval(x - h, xp).h) / (2 * h)
    assert v.h2 == pytest.approx(d2, abs=1e-8)
    assert v.h1 == pytest.approx(d1, abs=1e-8)
    X, P = g.map(np.array([x]), np.array([-v.h1]))
    assert X[0] == pytest.approx(xp, abs=1e-10) and P[0] == pytest.approx(v.h2, abs=1e-10)


def test_mixed_derivative_negative():
    g = two_mode_gen()
    xs = np.linspace(0, 1, 6)
    v = g.eval(xs, xs + 0.4)
    assert np.all(v.h12 < 0)


def test_generating_table():
    g = two_mode_gen()
    tab = GeneratingTable(g, nx=8, d_range=(-1, 1), nd=9)
    assert tab.max_mixed < 0
    x, xp = 0.33, 0.33 + 0.21
    assert np.ravel(tab.interp(x, xp))[0] == pytest.approx(g.eval(x, xp).h, abs=1e-4)


def test_shear_generating():
    g = ShearGenerating(2.0)
    v = g.eval(0.1, 0.5)
    X, Y = g.map(0.1, -v.h1)
    assert X == pytest.approx(0.5) and Y == pytest.approx(v.h2)


@pytest.mark.parametrize("p,q", [(0, 1), (1, 3), (2, 5), (-1, 2)])
def test_shear_minimal_orbits(p, q):
    o = minimal_periodic_orbit([ShearGenerating()], p, q, init=0.2)
    assert o.converged and o.local_min
    assert np.allclose(np.diff(np.append(o.x, o.x[0] + p)), p / q, atol=1e-9)
    assert np.allclose(o.y, p / q, atol=1e-9)


def test_invalid_rotation_target():
    with pytest.raises(ValueError):
        minimal_periodic_orbit([ShearGenerating()], 2, 4)


def test_conformal_half_orbit():
    f, gens = eps03()
    o = minimal_periodic_orbit(gens, 1, 2)
    assert o.converged and o.local_min and o.residual <= 1e-9
    # independent check with the composed time-1 map, two periods
    x, y = o.x[0], o.y[0]
    for _ in range(2):
        x, y = f.compose(np.array([x]), np.array([y]))
    assert x[0] == pytest.approx(o.x[0] + 1, abs=1e-7) and y[0] == pytest.approx(o.y[0], abs=1e-7)


def test_conformal_fixed_point_minimum():
    _, gens = eps03()
    o = minimal_periodic_orbit(gens, 0, 1, init=0.1)
    assert o.converged and o.local_min
    assert np.mod(o.x[0], 1.0) == pytest.approx(0.5, abs=1e-7)
    # the maximum of u is a critical point but not a minimum
    top = minimal_periodic_orbit(gens, 0, 1, init=0.0)
    assert top.residual <= 1e-9 and not top.local_min and not top.minimal


def test_action_decreases():
    _, gens = eps03()
    N = len(gens) * 2
    x0 = np.arange(N) * (1 / N) + 0.05 * np.sin(np.arange(N))
    W0, _, _ = action_gradient(gens, x0, 1)
    o = minimal_periodic_orbit(gens, 1, 2, init=x0)
    assert o.W <= W0 + 1e-12
