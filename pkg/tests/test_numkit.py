import cmath
import math
import random

import numpy as np
import pytest

from hermankit.errors import DegenerateInputError, PreconditionError
from hermankit.numkit import (
    DOUBLE,
    Polynomial,
    PrecisionContext,
    make_context,
    poly_roots,
)

from common import assert_close_sets


def test_context_epsilon_double():
    ctx = make_context(53)
    assert float(ctx.epsilon) == 2.0**-52


def test_context_epsilon_256():
    ctx = make_context(256)
    with ctx.workprec():
        assert ctx.epsilon == ctx.mpf(2) ** (-255)


def test_context_rejects_low_precision():
    with pytest.raises(PreconditionError):
        make_context(10)


def test_polynomial_basics():
    p = Polynomial((1.0, 0.0, 1.0))  # 1 + z^2
    assert p.degree == 2
    assert p(2.0) == 5.0
    assert p.derivative().coefficients == (0.0, 2.0)


def test_polynomial_strips_trailing_zeros():
    p = Polynomial((3.0, 1.0, 0.0, 0.0))
    assert p.degree == 1


def test_roots_of_z2_minus_1():
    roots = poly_roots(Polynomial((-1.0, 0.0, 1.0)))
    assert_close_sets(roots, [1.0, -1.0], tol=1e-12)


def test_roots_of_z2_plus_z_plus_1_quadratic_formula():
    # oracle: quadratic formula gives the primitive cube roots of unity
    expected = [cmath.exp(2j * math.pi / 3), cmath.exp(-2j * math.pi / 3)]
    roots = poly_roots(Polynomial((1.0, 1.0, 1.0)))
    assert_close_sets(roots, expected, tol=1e-12)


def test_roots_of_constructed_cubic():
    p = Polynomial.from_roots([1.0, 2.0, 3.0])
    roots = poly_roots(p)
    assert_close_sets(roots, [1.0, 2.0, 3.0], tol=1e-10)


def test_zero_polynomial_rejected():
    with pytest.raises(DegenerateInputError):
        poly_roots(Polynomial((0.0,)))


def test_constant_polynomial_rejected():
    with pytest.raises(PreconditionError):
        poly_roots(Polynomial((4.0,)))


def _residual_ok(coeffs, roots, ctx):
    tol = 1e3 * float(ctx.epsilon)
    maxc = max(abs(c) for c in coeffs)
    deg = len(coeffs) - 1
    for r in roots:
        val = 0j
        for c in reversed(coeffs):
            val = val * r + c
        assert abs(val) <= tol * maxc * (1.0 + abs(r)) ** deg


def test_random_unit_disk_polynomials_residuals_and_vieta():
    rng = random.Random(20240811)
    for trial in range(40):
        deg = rng.randrange(2, 65)
        coeffs = []
        for _ in range(deg + 1):
            r = math.sqrt(rng.random())
            phi = 2 * math.pi * rng.random()
            coeffs.append(complex(r * math.cos(phi), r * math.sin(phi)))
        if abs(coeffs[-1]) < 0.1:
            coeffs[-1] = 1.0 + 0j  # keep the leading coefficient well away from 0
        roots = poly_roots(Polynomial(tuple(coeffs)))
        assert len(roots) == deg
        _residual_ok(coeffs, roots, DOUBLE)
        vieta = -coeffs[-2] / coeffs[-1]
        total = sum(roots)
        assert abs(total - vieta) <= 1e3 * 2.0**-52 * (1.0 + abs(vieta)) * deg


def test_roots_match_companion_eigenvalues():
    # independent oracle: numpy.roots uses companion-matrix eigenvalues
    rng = np.random.default_rng(7)
    coeffs = rng.standard_normal(13) + 1j * rng.standard_normal(13)
    ours = poly_roots(Polynomial(tuple(coeffs)))
    theirs = np.roots(coeffs[::-1])
    assert_close_sets(ours, list(theirs), tol=1e-7)


def test_high_precision_roots():
    ctx = PrecisionContext(256)
    p = Polynomial.from_roots([0.5, -0.25, 1j, -1j, 2.0])
    roots = poly_roots(Polynomial(tuple(complex(c) for c in p.coefficients)), ctx)
    assert_close_sets(roots, [0.5, -0.25, 1j, -1j, 2.0], tol=1e-50)


def test_clustered_roots_degree_budget_case():
    # nearby roots such as iterate polynomials produce
    roots_in = [1.0, 1.0 + 1e-4, -0.5, -0.5 + 1e-4j]
    p = Polynomial.from_roots(roots_in)
    roots = poly_roots(p)
    assert_close_sets(roots, roots_in, tol=1e-6)
