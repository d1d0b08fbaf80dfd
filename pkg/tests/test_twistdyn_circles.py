import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistlab.twistdyn import (DetectParams, EulerLagrangeMap, OrbitEscape, RigidRotation, ShearMap,
                               StandardMap, circle_detect, classify_orbit, rotation_number)
from twistlab.twistdyn.circles import order_check
from twistlab.twistdyn.rotation import bump_weights, rotation_from_orbit

GOLD = (math.sqrt(5) - 1) / 2


def test_shear_orbits_closed_form():
    X, Y = ShearMap(2.0).orbits([0.1], [0.3], 4)
    assert np.allclose(X[0], 0.1 + 0.6 * np.arange(5))
    assert np.allclose(Y[0], 0.3)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 2.0))
def test_standard_map_inverse(x, y, k):
    f = StandardMap(k)
    xb, yb = f.inverse(*f(np.array([x]), np.array([y])))
    assert xb[0] == pytest.approx(x, abs=1e-12) and yb[0] == pytest.approx(y, abs=1e-12)


@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(-3, 3))
def test_standard_map_lift_equivariance(x, y, m):
    f = StandardMap(0.8)
    X, Y = f(np.array([x]), np.array([y]))
    Xs, Ys = f(np.array([x + m]), np.array([y]))
    assert Xs[0] == pytest.approx(X[0] + m, abs=1e-12) and Ys[0] == pytest.approx(Y[0], abs=1e-12)


def test_el_map_is_shear_for_flat(flat_LR):
    f = EulerLagrangeMap(flat_LR)
    x = np.linspace(0, 1, 7)
    y = np.linspace(-1, 1, 7)
    X, Y = f(x, y)
    assert np.allclose(X, x + y, atol=1e-10) and np.allclose(Y, y, atol=1e-12)
    Xb, Yb = f.inverse(X, Y)
    assert np.allclose(Xb, x, atol=1e-10)


def test_el_orbits_escape_tube(flat_LR):
    f = EulerLagrangeMap(flat_LR)
    _, Y = f.orbits([0.0], [2.5], 2)
    with pytest.raises(OrbitEscape):
        f.check_tube(Y[0])


# rotation numbers -------------------------------------------------------

def test_bump_weights_normalized():
    w = bump_weights(1000)
    assert w.sum() == pytest.approx(1.0) and np.all(w >= 0)


@pytest.mark.parametrize("y", [math.sqrt(2) - 1, GOLD, math.pi - 3, -math.e / 10])
def test_shear_rotation(y):
    est = rotation_number(ShearMap(), (0.2, y), 10_000)
    assert est.value == pytest.approx(y, abs=1e-12)


def test_rigid_rotation_weighted_beats_plain():
    f = RigidRotation(GOLD)
    x, _ = f.orbit(0.0, 0.0, 2000)
    # quasi-periodic perturbation of the increments
    xp = x + 0.1 * np.sin(2 * math.pi * x)
    w = rotation_from_orbit(xp)
    p = rotation_from_orbit(xp, method="plain")
    assert abs(w.value - GOLD) < 1e-10 < abs(p.value - GOLD)


def test_partial_rotation_on_escape(flat_LR):
    est = rotation_number(EulerLagrangeMap(flat_LR), (0.0, 1.5), 50)
    assert not est.partial
    est = rotation_number(EulerLagrangeMap(flat_LR, y_bound=1.0), (0.0, 1.5), 50)
    assert est.partial


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_rotation_monotone_in_y_on_shear(y1, y2):
    lo, hi = sorted((y1, y2))
    a = rotation_number(ShearMap(), (0.0, lo), 500).value
    b = rotation_number(ShearMap(), (0.0, hi), 500).value
    assert a <= b + 1e-12


# circle detection -------------------------------------------------------

IRRATIONAL = [math.sqrt(2) - 1, GOLD, math.sqrt(3) - 1, math.pi - 3, math.e - 2,
              math.sqrt(5) - 2, 1 - GOLD, -(math.sqrt(7) - 2), math.log(2), -math.sqrt(2) / 3]


@pytest.mark.parametrize("y", IRRATIONAL)
def test_shear_irrational_verified(y):
    c = circle_detect(ShearMap(), (0.1, y))
    assert c.verdict == "graph-verified"
    assert c.lipschitz == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("y", [0.5, 0.0, 1 / 3, -0.25, 2 / 5])
def test_shear_rational_indeterminate(y):
    assert circle_detect(ShearMap(), (0.1, y)).verdict == "indeterminate"


def test_order_check_finds_crossing():
    # x_0 < x_1 but images swap order
    x = np.array([0.1, 0.9, 0.2, 1.5])
    w = order_check(x, 1e-12)
    assert w is not None and w.violation > 0


def test_refuted_verdicts_carry_reproducible_witness():
    f = StandardMap(1.5)
    for y0 in (0.05, 0.3, 0.45):
        c = circle_detect(f, (0.1, y0), DetectParams(N=2000))
        assert c.verdict == "refuted"
        if c.verdict == "refuted":
            x, _ = c.orbit
            assert c.witness.reproduce(x)
            # and again from a fresh iteration of the seed
            xr, _ = f.orbit(0.1, y0, 2000)
            assert c.witness.reproduce(xr)


@given(st.floats(0, 1), st.floats(-0.5, 0.5))
def test_any_refutation_reproducible(x0, y0):
    f = StandardMap(1.2)
    c = circle_detect(f, (x0, y0), DetectParams(N=500))
    if c.verdict == "refuted":
        assert c.witness.reproduce(f.orbit(x0, y0, 500)[0])


def test_standard_map_island_refuted():
    # seeds near the elliptic point (1/2, 0) of the primary resonance lie on
    # islands, which are not graphs over the circle
    c = circle_detect(StandardMap(0.9), (0.5, 0.1))
    assert c.verdict == "refuted"


def test_classify_escape_indeterminate(flat_LR):
    f = EulerLagrangeMap(flat_LR, y_bound=1.0)
    x, y = f.orbit(0.0, 1.2, 10)
    c = classify_orbit(x, y, (0.0, 1.2), DetectParams(N=10), f)
    assert c.verdict == "indeterminate" and "escaped" in c.note
