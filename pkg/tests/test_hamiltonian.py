import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistlab.hamiltonian import (FactorizationError, HamiltonianSystem, check_tube, default_tube,
                                  factorize_time1, time_map)
from twistlab.metric import InvalidInput, MetricSpec
from twistlab.reduction import build_reduced, el_map, truncate

_cache = {}


def system(name):
    if name not in _cache:
        spec = {"flat": MetricSpec.flat(), "conf": MetricSpec.conformal(0.05),
                "two": MetricSpec({(0, 1): (0.02, 0.0), (-1, 1): (0.02, 0.0)})}[name]
        _cache[name] = HamiltonianSystem(truncate(build_reduced(spec, (1, 0)), 2.0, 1.0))
    return _cache[name]


unit = st.floats(0, 1)


@given(st.sampled_from(["flat", "conf", "two"]), unit, unit, st.floats(-4.5, 4.5))
def test_legendre_round_trip(name, t, x, r):
    H = system(name)
    p = H.legendre(t, x, r)
    assert H.legendre_inverse(t, x, p)[0] == pytest.approx(r, abs=1e-10)


def test_legendre_round_trip_blend_zone(rng):
    H = system("two")
    n = 1000
    t, x = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    r = rng.choice([-1, 1], n) * rng.uniform(2.0, 3.0, n)
    assert np.abs(H.legendre_inverse(t, x, H.legendre(t, x, r)) - r).max() <= 1e-10


@given(st.sampled_from(["flat", "conf", "two"]), unit, unit, st.floats(0.0, 10.0), st.booleans())
def test_quadratic_tail(name, t, x, extra, neg):
    H = system(name)
    p = (H.p_tail + extra) * (-1 if neg else 1)
    assert H(t, x, p)[0] == pytest.approx(p * p / (2 * H.D), rel=1e-14)


@given(unit, unit, st.floats(-3.5, 3.5))
def test_hamilton_derivatives(t, x, p):
    H = system("two")
    h = 1e-6
    _, Hx, Hp = H.hamiltonian_eval(t, x, p)
    fx = (H(t, x + h, p) - H(t, x - h, p)) / (2 * h)
    fp = (H(t, x, p + h) - H(t, x, p - h)) / (2 * h)
    assert Hx[0] == pytest.approx(fx[0], abs=1e-7)
    assert Hp[0] == pytest.approx(fp[0], abs=1e-7)


def test_flat_hamiltonian_inner():
    H = system("flat")
    p = np.linspace(-0.85, 0.85, 11)
    assert np.allclose(H(0.0, 0.0, p), -np.sqrt(1 - p ** 2), atol=1e-13)


def test_hpp_audit_bounds():
    H = system("flat")
    lo, hi, C = H.hpp_audit(n=4, n_p=101)
    assert lo > 0 and C >= hi
    L = H.L
    assert C <= L.C * (1 + 1e-9)


def test_time_map_agrees_with_el_flow(rng):
    H = system("two")
    x = rng.uniform(0, 1, 50)
    r = rng.uniform(-1.5, 1.5, 50)
    X, R, _ = el_map(H.L, x, r, 0.0, 1.0, tol=1e-12)
    Xh, Ph = H.time_map(0.0, 1.0, x, H.legendre(0.0, x, r), tol=1e-12)
    assert np.abs(X - Xh).max() <= 1e-7
    assert np.abs(H.legendre(1.0, X, R) - Ph).max() <= 1e-7


def test_variational_jacobian_matches_differences():
    H = system("two")
    x, p, h = 0.3, 0.4, 1e-6
    X, P, J, S = H.time_map_variational(0.0, 1.0, x, p, tol=1e-12)
    Xa, Pa = H.time_map(0.0, 1.0, [x + h, x - h, x, x], [p, p, p + h, p - h], tol=1e-12)
    num = np.array([[(Xa[0] - Xa[1]) / (2 * h), (Xa[2] - Xa[3]) / (2 * h)],
                    [(Pa[0] - Pa[1]) / (2 * h), (Pa[2] - Pa[3]) / (2 * h)]])
    assert np.allclose(J[0], num, atol=1e-6)
    assert np.linalg.det(J[0]) == pytest.approx(1.0, abs=1e-9)


def test_flat_twist_closed_form():
    """Flat case: dX/dp over a unit time is (1 - p^2)^(-3/2) inside |p| < tail."""
    H = system("flat")
    p = np.array([-0.5, 0.0, 0.3])
    _, _, J, _ = H.time_map_variational(0.0, 1.0, np.zeros(3), p)
    assert np.allclose(J[:, 0, 1], (1 - p ** 2) ** -1.5, rtol=1e-9)


def test_time_map_requires_order():
    H = system("flat")
    with pytest.raises(InvalidInput):
        time_map(H, 1.0, 0.5, (0.0, 0.1))


def test_factorization_flat():
    H = system("flat")
    f = factorize_time1(H, grid=16)
    assert f.n == 1
    assert min(f.min_twist) > 0
    assert f.audits[0].min_twist_lagrangian == pytest.approx(1.0, rel=1e-8)
    assert max(f.det_error) <= 1e-6
    rep = f.report()
    assert set(rep) >= {"n", "breakpoints", "min_twist", "det_error", "P"}


def test_factorization_composition_matches_time1():
    H = system("conf")
    f = factorize_time1(H, grid=8)
    x, p = np.array([0.1, 0.6]), np.array([0.3, -0.8])
    Xc, Pc = f.compose(x, p)
    Xd, Pd = H.time_map(0.0, 1.0, x, p)
    assert np.allclose(Xc, Xd, atol=1e-9) and np.allclose(Pc, Pd, atol=1e-9)


def test_tube_invariance():
    H = system("two")
    P = default_tube(H)
    assert check_tube(H, P, n=8) <= P


def test_tube_inside_blend_rejected():
    H = system("flat")
    with pytest.raises(InvalidInput):
        factorize_time1(H, P=0.5 * H.p_tail, grid=4)


def test_factorization_cap_exceeded():
    H = HamiltonianSystem(truncate(build_reduced(MetricSpec.conformal(0.3), (1, 0)), 1.5, 3.0))
    with pytest.raises(FactorizationError) as e:
        factorize_time1(H, cap=1, grid=16)
    assert e.value.history and e.value.history[0][0] == 1
