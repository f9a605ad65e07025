import cmath
import math
import random

import numpy as np
import pytest

from hermankit.errors import (
    DegreeOverflowError,
    PoleDerivativeError,
    PreconditionError,
)
from hermankit.maps import (
    AT_INFINITY,
    AntipodalCubic,
    BlaschkeMap,
    CubicHermanMap,
    QuadraticSiegelMap,
    RotationMap,
    derivative,
    eta_transform,
    evaluate,
    is_infinite,
    periodic_points,
)
from hermankit.numkit import Polynomial, poly_roots

from common import SquareMap, assert_close_sets

GOLDEN = (math.sqrt(5) - 1) / 2
FIG2 = CubicHermanMap(a=2 + 0.1j, u=-3.98404183 + 3.28819628j)


def test_quadratic_fixes_origin():
    for alpha in (GOLDEN, 0.25, 0.7071):
        P = QuadraticSiegelMap.from_alpha(alpha)
        assert P(0.0) == 0.0
        assert abs(abs(P.lam) - 1.0) < 1e-15


def test_cubic_superattracting_fixed_points():
    assert FIG2(0.0) == 0.0
    assert is_infinite(FIG2(AT_INFINITY))


def test_blaschke_at_one():
    for t in (0.0, 0.3, 0.77):
        f = BlaschkeMap(t=t, a=4.0)
        assert abs(f(1.0) - cmath.exp(2j * math.pi * t)) < 1e-15


def test_derivative_vanishes_at_quadratic_critical_point():
    P = QuadraticSiegelMap.from_alpha(GOLDEN)
    omega = -P.lam / 2
    assert abs(P.derivative(omega)) < 1e-15


def test_cubic_critical_points():
    assert abs(FIG2.derivative(1.0)) < 1e-12
    assert abs(FIG2.derivative(FIG2.c)) < 1e-12


def test_derivative_matches_finite_difference():
    rng = random.Random(3)
    maps_ = [
        QuadraticSiegelMap.from_alpha(GOLDEN),
        FIG2,
        BlaschkeMap(t=0.3, a=4.0),
        AntipodalCubic(q=1.5 - 0.5j),
        RotationMap(GOLDEN),
    ]
    h = 1e-6
    for m in maps_:
        for _ in range(20):
            z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            if m.pole is not None and abs(z - m.pole) < 1e-2:
                continue
            fd = (m(z + h) - m(z - h)) / (2 * h)
            an = m.derivative(z)
            assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_derivative_at_pole_raises():
    with pytest.raises(PoleDerivativeError):
        FIG2.derivative(FIG2.pole)


def test_blaschke_unit_circle_invariant():
    theta = np.arange(10_000) / 10_000
    z = np.exp(2j * np.pi * theta)
    for a in (3.0, 4.0, 7.5):
        f = BlaschkeMap(t=0.37, a=a)
        w = f.eval_array(z)
        assert np.max(np.abs(np.abs(w) - 1.0)) < 1e-12


def test_quadratic_conjugation_symmetry():
    rng = random.Random(11)
    P = QuadraticSiegelMap.from_alpha(GOLDEN)
    Pm = QuadraticSiegelMap.from_alpha(-GOLDEN)
    for _ in range(25):
        z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        assert abs(Pm(z.conjugate()).conjugate() - P(z)) < 1e-13


def test_cubic_derivative_roots_are_critical_set():
    a, k, u = FIG2.a, FIG2.kappa, FIG2.u
    # numerator of Q': u z (-2k z^2 + (3+ak) z - 2a)
    num = Polynomial((0.0, -2 * a * u, (3 + a * k) * u, -2 * k * u))
    roots = poly_roots(num)
    assert_close_sets(roots, [0.0, 1.0, FIG2.c], tol=1e-9)


def test_eta_transform_values():
    assert eta_transform(1.0, 1.0) == pytest.approx(1 / 32)
    assert abs(eta_transform(4.0, 1j) - (-0.5j)) < 1e-15


def test_eta_transform_involution():
    for z in (1.0, 1j, 2 - 3j):
        for r in (0.5, 1.0, 2.5):
            zz = eta_transform(r, eta_transform(r, z))
            assert abs(zz - z) < 1e-12 * max(1.0, abs(z))


def test_eta_transform_swaps_zero_and_infinity():
    assert is_infinite(eta_transform(1.0, 0.0))
    assert eta_transform(1.0, AT_INFINITY) == 0.0


def test_eta_transform_needs_positive_r():
    with pytest.raises(PreconditionError):
        eta_transform(0.0, 1.0)


def test_cubic_parameter_validation():
    for bad_a in (0.0, 1.0, 1.5, 2.0, 3.0):
        with pytest.raises(PreconditionError):
            CubicHermanMap(a=bad_a, u=1.0)
    with pytest.raises(PreconditionError):
        CubicHermanMap(a=2 + 0.1j, u=0.0)


def test_periodic_points_square_map_fixed():
    recs = periodic_points(SquareMap(), 1)
    pts = [r.points[0] for r in recs]
    assert_close_sets(pts, [0.0, 1.0], tol=1e-10)


def test_periodic_points_square_map_two_cycle():
    recs = periodic_points(SquareMap(), 2)
    two = [r for r in recs if r.period == 2]
    assert len(two) == 1
    assert_close_sets(two[0].points, [cmath.exp(2j * math.pi / 3), cmath.exp(-2j * math.pi / 3)], tol=1e-9)
    assert two[0].multiplier == pytest.approx(4.0)


def test_periodic_points_quadratic_fixed_points():
    P = QuadraticSiegelMap.from_alpha(GOLDEN)
    recs = periodic_points(P, 1)
    pts = [r.points[0] for r in recs]
    assert_close_sets(pts, [0.0, 1.0 - P.lam], tol=1e-10)


def test_periodic_points_closed_under_map():
    for p in (1, 2, 3):
        for rec in periodic_points(FIG2, p):
            pts = rec.points
            for i, z in enumerate(pts):
                nxt = pts[(i + 1) % rec.period]
                assert abs(FIG2(z) - nxt) < 1e-6
            w = z
            for _ in range(rec.period):
                w = FIG2(w)
            assert abs(w - z) < 1e-7


def test_periodic_points_multiplier_chain_rule():
    for rec in periodic_points(FIG2, 2):
        prod = 1.0 + 0j
        for z in rec.points:
            prod *= FIG2.derivative(z)
        assert abs(prod - rec.multiplier) < 1e-8 * max(1.0, abs(prod))


def test_periodic_points_degree_overflow():
    with pytest.raises(DegreeOverflowError):
        periodic_points(FIG2, 5)


def test_spec_level_wrappers():
    P = QuadraticSiegelMap.from_alpha(GOLDEN)
    assert evaluate(P, 0.0) == 0.0
    assert derivative(P, 0.0) == P.lam
