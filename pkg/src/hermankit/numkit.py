"""Numeric substrate: precision contexts and polynomial root finding.

A PrecisionContext fixes the significand width (in bits) for every mpmath
computation performed under it.  Double precision (53 bits) is the default
for orbits and rendering; 256 bits is the recommended context for
continued-fraction values and linearizer coefficients, whose intermediate
quantities overflow or denormalize doubles.

poly_roots uses simultaneous Aberth–Ehrlich iteration started from a
perturbed circle, which stays robust on the clustered roots of iterate
polynomials.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mp

from .errors import DegenerateInputError, NumericError, PreconditionError

MIN_BITS = 53

#: residual multiplier in the poly_roots contract: |p(r)| <= 1e3*eps*max|c|*(1+|r|)^deg
ROOT_TOL_FACTOR = 1e3


@dataclass(frozen=True)
class PrecisionContext:
    """Arithmetic context with a fixed significand precision.

    Attributes
    ----------
    bits : int
        Significand precision; at least 53.
    """

    bits: int

    def __post_init__(self):
        if not isinstance(self.bits, int) or self.bits < MIN_BITS:
            raise PreconditionError(
                f"invalid precision: need an integer >= {MIN_BITS} bits, got {self.bits!r}"
            )

    @property
    def epsilon(self) -> mpmath.mpf:
        """Unit roundoff 2**(1 - bits)."""
        return mp.ldexp(1, 1 - self.bits)

    def workprec(self):
        """Context manager activating this precision in mpmath."""
        return mpmath.workprec(self.bits)

    def mpf(self, x) -> mpmath.mpf:
        with self.workprec():
            return +mp.mpf(x)

    def mpc(self, re, im=0) -> mpmath.mpc:
        with self.workprec():
            return +mp.mpc(re, im)


def make_context(bits: int) -> PrecisionContext:
    """Return a context rounding correctly to ``bits`` significand bits."""
    return PrecisionContext(bits)


#: default context for orbits and rendering
DOUBLE = PrecisionContext(53)
#: default context for continued-fraction values and linearizer coefficients
QUAD256 = PrecisionContext(256)


def _strip_trailing_zeros(coeffs):
    last = len(coeffs) - 1
    while last > 0 and coeffs[last] == 0:
        last -= 1
    return tuple(coeffs[: last + 1])


@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial, coefficients ordered lowest degree first."""

    coefficients: tuple

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise DegenerateInputError("a polynomial needs at least one coefficient")
        object.__setattr__(
            self, "coefficients", _strip_trailing_zeros(tuple(self.coefficients))
        )

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coefficients[0] == 0

    def __call__(self, z):
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * z + c
        return acc

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial((0,))
        return Polynomial(tuple(k * c for k, c in enumerate(self.coefficients) if k >= 1))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], leading=1) -> "Polynomial":
        coeffs = np.array([leading], dtype=complex)
        for r in roots:
            coeffs = np.convolve(coeffs, np.array([-r, 1.0], dtype=complex))
        return cls(tuple(coeffs))


def _root_residual_ok(poly_coeffs, roots, tol):
    """Check |p(r)| <= tol * max|c| * (1+|r|)^deg for every root."""
    maxc = max(abs(complex(c)) for c in poly_coeffs)
    deg = len(poly_coeffs) - 1
    for r in roots:
        bound = tol * maxc * (1.0 + abs(complex(r))) ** deg
        acc = 0j
        for c in reversed(poly_coeffs):
            acc = acc * complex(r) + complex(c)
        if abs(acc) > bound:
            return False
    return True


def _initial_circle(coeffs_np):
    """Perturbed-circle starting points for Aberth iteration."""
    d = len(coeffs_np) - 1
    # Cauchy-style radius estimate from the coefficient profile
    lead = abs(coeffs_np[-1])
    radius = 0.0
    for k in range(d):
        c = abs(coeffs_np[k])
        if c > 0:
            radius = max(radius, (c / lead) ** (1.0 / (d - k)))
    radius = max(radius, 1e-6) * 1.1
    k = np.arange(d)
    # golden-angle offset keeps the guesses off any symmetry axis
    angles = 2.0 * np.pi * (k + 0.37) / d + 0.4812118250596
    return radius * np.exp(1j * angles) * (1.0 + 0.01 * np.cos(7.0 * k))


def _aberth_double(coeffs_np, maxiter=400):
    d = len(coeffs_np) - 1
    deriv = coeffs_np[1:] * np.arange(1, d + 1)
    z = _initial_circle(coeffs_np)

    def horner(c, x):
        acc = np.zeros_like(x)
        for ck in c[::-1]:
            acc = acc * x + ck
        return acc

    for _ in range(maxiter):
        pz = horner(coeffs_np, z)
        dpz = horner(deriv, z)
        dpz = np.where(dpz == 0, 1e-300, dpz)
        w = pz / dpz
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = np.sum(1.0 / diff, axis=1)
        denom = 1.0 - w * s
        denom = np.where(np.abs(denom) < 1e-300, 1e-300, denom)
        step = w / denom
        z = z - step
        if np.max(np.abs(step)) < 1e-15 * (1.0 + np.max(np.abs(z))):
            break
    # Newton polish sharpens residuals after the simultaneous phase
    for _ in range(3):
        pz = horner(coeffs_np, z)
        dpz = horner(deriv, z)
        mask = np.abs(dpz) > 0
        z = np.where(mask, z - pz / np.where(mask, dpz, 1.0), z)
    return z


def _aberth_mp(coeffs, bits, maxiter=200):
    with mpmath.workprec(bits + 16):
        cs = [mp.mpc(c) for c in coeffs]
        d = len(cs) - 1
        dcs = [k * cs[k] for k in range(1, d + 1)]
        start = _initial_circle(np.array([complex(c) for c in coeffs]))
        z = [mp.mpc(v) for v in start]
        stop = mp.ldexp(1, -bits)

        def horner(c, x):
            acc = mp.mpc(0)
            for ck in reversed(c):
                acc = acc * x + ck
            return acc

        for _ in range(maxiter):
            corr_max = mp.mpf(0)
            for i in range(d):
                pz = horner(cs, z[i])
                dpz = horner(dcs, z[i])
                if dpz == 0:
                    dpz = mp.mpc(stop)
                w = pz / dpz
                s = mp.mpc(0)
                for j in range(d):
                    if j != i:
                        s += 1 / (z[i] - z[j])
                denom = 1 - w * s
                if denom == 0:
                    denom = mp.mpc(stop)
                step = w / denom
                z[i] = z[i] - step
                corr_max = max(corr_max, abs(step))
            if corr_max < stop * (1 + max(abs(v) for v in z)):
                break
        for _ in range(3):
            for i in range(d):
                dpz = horner(dcs, z[i])
                if dpz != 0:
                    z[i] = z[i] - horner(cs, z[i]) / dpz
        return z


def poly_roots(p: Polynomial, ctx: PrecisionContext = DOUBLE) -> list:
    """All complex roots of ``p``, with multiplicity, in the given context.

    Roots satisfy |p(r)| <= 1e3*eps * max|c| * (1+|r|)^degree with
    eps = ctx.epsilon.  Raises DegenerateInputError on the zero polynomial and
    PreconditionError on constants.
    """
    if p.is_zero:
        raise DegenerateInputError("cannot take roots of the zero polynomial")
    if p.degree < 1:
        raise PreconditionError("poly_roots needs degree >= 1")

    coeffs = list(p.coefficients)
    # deflate exact zeros at the origin first; Aberth dislikes them
    n_zero = 0
    while coeffs[0] == 0:
        coeffs.pop(0)
        n_zero += 1

    roots: list = []
    if len(coeffs) >= 2:
        if ctx.bits <= 53:
            arr = np.array([complex(c) for c in coeffs], dtype=complex)
            roots = list(_aberth_double(arr))
        else:
            roots = list(_aberth_mp(coeffs, ctx.bits))

    tol = ROOT_TOL_FACTOR * float(ctx.epsilon)
    if ctx.bits <= 53:
        check = [complex(r) for r in roots]
        if not _root_residual_ok([complex(c) for c in coeffs], check, tol):
            raise NumericError("root residuals exceed the contract tolerance")
        roots = check

    roots.extend([0.0j] * n_zero)
    roots.sort(key=lambda r: (round(float(complex(r).real), 12),
                              round(float(complex(r).imag), 12)))
    return roots
