"""Map families as evaluable objects: quadratics with an indifferent fixed
point, the cubic family with two free critical orbits, circle-preserving
cubic Blaschke products, antipode-preserving cubics, rigid rotations, and
the auxiliary inversion eta.

Evaluation follows a spherical convention: a pole maps to the infinity
marker AT_INFINITY rather than raising, and infinity itself is evaluated
through reciprocal coordinates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegreeOverflowError,
    PoleDerivativeError,
    PreconditionError,
)
from .numkit import DOUBLE, Polynomial, PrecisionContext, poly_roots

#: spherical infinity marker returned by evaluations that hit a pole
AT_INFINITY = complex(math.inf, math.inf)

NEAR_POLE = 1e-8
CYCLE_GROUP_TOL = 1e-6
CYCLE_RESIDUAL_TOL = 1e-8
DEGREE_BUDGET = 128
TWO_PI = 2.0 * math.pi


def is_infinite(z) -> bool:
    return cmath.isinf(complex(z))


def unit_phase(t: float) -> complex:
    """e^{2 pi i t} with t real."""
    return cmath.exp(2j * math.pi * t)


@dataclass(frozen=True)
class RotationMap:
    """Rigid rotation z -> e^{2 pi i alpha} z (degenerate family member)."""

    alpha: float

    @property
    def lam(self) -> complex:
        return unit_phase(self.alpha)

    @property
    def degree(self) -> int:
        return 1

    @property
    def pole(self) -> Optional[complex]:
        return None

    @property
    def numer_coeffs(self):
        return (0.0, self.lam)

    @property
    def denom_coeffs(self):
        return (1.0,)

    def __call__(self, z):
        if is_infinite(z):
            return AT_INFINITY
        return self.lam * z

    def eval_array(self, z):
        return self.lam * z

    def derivative(self, z):
        return self.lam

    @property
    def critical_points(self):
        return ()


@dataclass(frozen=True)
class QuadraticSiegelMap:
    """z -> lam*z + z^2 with lam = e^{2 pi i alpha} on the unit circle."""

    alpha: float
    lam: complex

    @classmethod
    def from_alpha(cls, alpha) -> "QuadraticSiegelMap":
        a = float(alpha)
        lam = unit_phase(a)
        lam /= abs(lam)
        return cls(alpha=a, lam=lam)

    @classmethod
    def from_lambda(cls, lam: complex) -> "QuadraticSiegelMap":
        mod = abs(lam)
        if not math.isclose(mod, 1.0, rel_tol=0, abs_tol=1e-9):
            raise PreconditionError("lambda must lie on the unit circle")
        return cls(alpha=cmath.phase(lam) / TWO_PI % 1.0, lam=lam / mod)

    @property
    def degree(self) -> int:
        return 2

    @property
    def pole(self) -> Optional[complex]:
        return None

    @property
    def critical_point(self) -> complex:
        return -self.lam / 2.0

    @property
    def critical_points(self):
        return (self.critical_point,)

    @property
    def numer_coeffs(self):
        return (0.0, self.lam, 1.0)

    @property
    def denom_coeffs(self):
        return (1.0,)

    def __call__(self, z):
        if is_infinite(z):
            return AT_INFINITY
        return self.lam * z + z * z

    def eval_array(self, z):
        return self.lam * z + z * z

    def derivative(self, z):
        if is_infinite(z):
            raise PoleDerivativeError("derivative at infinity is not defined here")
        return self.lam + 2.0 * z


@dataclass(frozen=True)
class CubicHermanMap:
    """Q(z) = u z^2 (z-a) / (1 - (2a-3)/(a-2) z).

    Super-attracting fixed points at 0 and infinity; finite critical points
    0, 1 and c = a(a-2)/(2a-3); pole at b = (a-2)/(2a-3).
    """

    a: complex
    u: complex

    def __post_init__(self):
        a = complex(self.a)
        for bad in (0.0, 1.0, 1.5, 2.0, 3.0):
            if abs(a - bad) < 1e-12:
                raise PreconditionError(f"a = {a} is a degenerate family parameter")
        if self.u == 0:
            raise PreconditionError("u must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "u", complex(self.u))

    @property
    def kappa(self) -> complex:
        return (2.0 * self.a - 3.0) / (self.a - 2.0)

    @property
    def c(self) -> complex:
        """Second free critical point a(a-2)/(2a-3)."""
        return self.a * (self.a - 2.0) / (2.0 * self.a - 3.0)

    @property
    def pole(self) -> complex:
        """b = (a-2)/(2a-3)."""
        return (self.a - 2.0) / (2.0 * self.a - 3.0)

    @property
    def degree(self) -> int:
        return 3

    @property
    def critical_points(self):
        return (0.0, 1.0, self.c)

    @property
    def numer_coeffs(self):
        return (0.0, 0.0, -self.u * self.a, self.u)

    @property
    def denom_coeffs(self):
        return (1.0, -self.kappa)

    def __call__(self, z):
        if is_infinite(z):
            return AT_INFINITY
        if abs(z - self.pole) < NEAR_POLE:
            num = self.u * z * z * (z - self.a)
            if num == 0:
                return 0.0j
            w = (1.0 - self.kappa * z) / num  # reciprocal coordinate
            return AT_INFINITY if w == 0 else 1.0 / w
        return self.u * z * z * (z - self.a) / (1.0 - self.kappa * z)

    def eval_array(self, z):
        return self.u * z * z * (z - self.a) / (1.0 - self.kappa * z)

    def derivative(self, z):
        if is_infinite(z) or abs(z - self.pole) < NEAR_POLE:
            raise PoleDerivativeError("derivative requested at or too near the pole")
        k = self.kappa
        num = z * (-2.0 * k * z * z + (3.0 + self.a * k) * z - 2.0 * self.a)
        return self.u * num / (1.0 - k * z) ** 2


@dataclass(frozen=True)
class BlaschkeMap:
    """f(z) = e^{2 pi i t} z^2 (z-a)/(1-a z).

    For real a >= 3 the unit circle is invariant; a = 3 is the critical
    form, a > 3 gives circle diffeomorphisms.  Complex a is accepted so the
    broken family can be probed, but circle-based operations refuse it.
    """

    t: float
    a: complex

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t) % 1.0)
        object.__setattr__(self, "a", complex(self.a))
        if abs(self.a) < 1e-12:
            raise PreconditionError("a = 0 degenerates the family")

    @property
    def phase(self) -> complex:
        return unit_phase(self.t)

    @property
    def is_circle_symmetric(self) -> bool:
        return self.a.imag == 0.0 and self.a.real >= 3.0

    @property
    def degree(self) -> int:
        return 3

    @property
    def pole(self) -> complex:
        return 1.0 / self.a

    @property
    def critical_points(self):
        a = self.a
        disc = cmath.sqrt((3.0 + a * a) ** 2 - 16.0 * a * a)
        r1 = ((3.0 + a * a) + disc) / (4.0 * a)
        r2 = ((3.0 + a * a) - disc) / (4.0 * a)
        return (0.0, r1, r2)

    @property
    def numer_coeffs(self):
        e = self.phase
        return (0.0, 0.0, -e * self.a, e)

    @property
    def denom_coeffs(self):
        return (1.0, -self.a)

    def __call__(self, z):
        if is_infinite(z):
            return AT_INFINITY
        if abs(z - self.pole) < NEAR_POLE:
            num = self.phase * z * z * (z - self.a)
            if num == 0:
                return 0.0j
            w = (1.0 - self.a * z) / num
            return AT_INFINITY if w == 0 else 1.0 / w
        return self.phase * z * z * (z - self.a) / (1.0 - self.a * z)

    def eval_array(self, z):
        return self.phase * z * z * (z - self.a) / (1.0 - self.a * z)

    def derivative(self, z):
        if is_infinite(z) or abs(z - self.pole) < NEAR_POLE:
            raise PoleDerivativeError("derivative requested at or too near the pole")
        a = self.a
        num = z * (-2.0 * a * z * z + (3.0 + a * a) * z - 2.0 * a)
        return self.phase * num / (1.0 - a * z) ** 2


@dataclass(frozen=True)
class AntipodalCubic:
    """h(z) = z^2 (q-z)/(1 + conj(q) z), antipode-preserving cubic."""

    q: complex

    def __post_init__(self):
        object.__setattr__(self, "q", complex(self.q))

    @property
    def degree(self) -> int:
        return 3

    @property
    def pole(self) -> Optional[complex]:
        qc = self.q.conjugate()
        return None if qc == 0 else -1.0 / qc

    @property
    def critical_points(self):
        q = self.q
        qc = q.conjugate()
        if qc == 0:
            return (0.0,)
        disc = cmath.sqrt((abs(q) ** 2 - 3.0) ** 2 + 16.0 * abs(q) ** 2)
        r1 = ((abs(q) ** 2 - 3.0) + disc) / (4.0 * qc)
        r2 = ((abs(q) ** 2 - 3.0) - disc) / (4.0 * qc)
        return (0.0, r1, r2)

    @property
    def numer_coeffs(self):
        return (0.0, 0.0, self.q, -1.0)

    @property
    def denom_coeffs(self):
        return (1.0, self.q.conjugate())

    def __call__(self, z):
        if is_infinite(z):
            return AT_INFINITY
        pole = self.pole
        if pole is not None and abs(z - pole) < NEAR_POLE:
            num = z * z * (self.q - z)
            if num == 0:
                return 0.0j
            w = (1.0 + self.q.conjugate() * z) / num
            return AT_INFINITY if w == 0 else 1.0 / w
        return z * z * (self.q - z) / (1.0 + self.q.conjugate() * z)

    def eval_array(self, z):
        return z * z * (self.q - z) / (1.0 + self.q.conjugate() * z)

    def derivative(self, z):
        pole = self.pole
        if is_infinite(z) or (pole is not None and abs(z - pole) < NEAR_POLE):
            raise PoleDerivativeError("derivative requested at or too near the pole")
        q, qc = self.q, self.q.conjugate()
        num = z * (-2.0 * qc * z * z + (abs(q) ** 2 - 3.0) * z + 2.0 * q)
        return num / (1.0 + qc * z) ** 2


@dataclass(frozen=True)
class CycleRecord:
    """A periodic cycle: its points in orbit order, minimal period and
    multiplier (product of derivatives along the cycle)."""

    points: tuple
    period: int
    multiplier: complex

    @property
    def is_repelling(self) -> bool:
        return abs(self.multiplier) > 1.0


def evaluate(mapping, z):
    """Spec-level eval: spherical evaluation of any family member."""
    return mapping(z)


def derivative(mapping, z):
    """Spec-level derivative; raises PoleDerivativeError at poles."""
    return mapping.derivative(z)


def eta_transform(r: float, z):
    """The inversion eta_r(z) = r^2/(32 z); swaps 0 and infinity."""
    if not r > 0:
        raise PreconditionError("eta_transform needs r > 0")
    if is_infinite(z):
        return 0.0j
    if z == 0:
        return AT_INFINITY
    return r * r / (32.0 * z)


def _homogeneous_iterate(mapping, p: int):
    """Coefficient arrays (N_p, D_p) of the p-th iterate as a ratio."""
    d = mapping.degree
    n0 = np.zeros(d + 1, dtype=complex)
    n0[: len(mapping.numer_coeffs)] = mapping.numer_coeffs
    d0 = np.zeros(d + 1, dtype=complex)
    d0[: len(mapping.denom_coeffs)] = mapping.denom_coeffs

    N = np.array([0.0, 1.0], dtype=complex)  # identity map z
    D = np.array([1.0], dtype=complex)
    for _ in range(p):
        # powers N^i and D^j for i, j = 0..d
        npow = [np.array([1.0], dtype=complex)]
        dpow = [np.array([1.0], dtype=complex)]
        for _k in range(d):
            npow.append(np.convolve(npow[-1], N))
            dpow.append(np.convolve(dpow[-1], D))
        size = len(npow[d]) + len(dpow[d])
        Nn = np.zeros(size, dtype=complex)
        Dn = np.zeros(size, dtype=complex)
        for i in range(d + 1):
            term = np.convolve(npow[i], dpow[d - i])
            if n0[i] != 0:
                Nn[: len(term)] += n0[i] * term
            if d0[i] != 0:
                Dn[: len(term)] += d0[i] * term
        N, D = np.trim_zeros(Nn, "b"), np.trim_zeros(Dn, "b")
        if len(N) == 0:
            N = np.array([0.0], dtype=complex)
        if len(D) == 0:
            raise PreconditionError("iterate denominator vanished identically")
    return N, D


def _iterate_with_derivative(mapping, z: complex, p: int):
    w = z
    deriv = 1.0 + 0.0j
    for _ in range(p):
        try:
            deriv *= mapping.derivative(w)
        except PoleDerivativeError:
            return None, None
        w = mapping(w)
        if is_infinite(w):
            return None, None
    return w, deriv


def periodic_points(
    mapping,
    p: int,
    ctx: PrecisionContext = DOUBLE,
    degree_budget: int = DEGREE_BUDGET,
) -> list:
    """All cycles of minimal period dividing ``p`` in the finite plane.

    Solutions of map^p(z) = z are found as roots of the cleared-denominator
    iterate polynomial, polished against the map itself, and grouped into
    cycles; each returned record has residual |map^p(z) - z| <= 1e-8 and the
    chain-rule multiplier.  Results are sorted by (period, real, imag) of
    the cycle representative.
    """
    if p < 1:
        raise PreconditionError("period p must be >= 1")
    if mapping.degree**p > degree_budget:
        raise DegreeOverflowError(
            f"degree {mapping.degree}**{p} exceeds the root-finder budget {degree_budget}"
        )
    N, D = _homogeneous_iterate(mapping, p)
    # g(z) = N_p(z) - z * D_p(z)
    size = max(len(N), len(D) + 1)
    g = np.zeros(size, dtype=complex)
    g[: len(N)] += N
    g[1 : len(D) + 1] -= D
    g = np.trim_zeros(g, "b")
    if len(g) <= 1:
        return []
    roots = poly_roots(Polynomial(tuple(g)), ctx)

    polished = []
    for r in roots:
        z = complex(r)
        ok = False
        for _ in range(8):
            w, deriv = _iterate_with_derivative(mapping, z, p)
            if w is None:
                break
            f = w - z
            if abs(f) <= CYCLE_RESIDUAL_TOL:
                ok = True
                if abs(f) < 1e-14:
                    break
            dd = deriv - 1.0
            if dd == 0:
                break
            step = f / dd
            if not cmath.isfinite(step) or abs(step) > 1.0:
                break
            z = z - step
        if ok:
            w, _ = _iterate_with_derivative(mapping, z, p)
            if w is not None and abs(w - z) <= CYCLE_RESIDUAL_TOL:
                polished.append(z)

    # group into cycles
    used = [False] * len(polished)
    order = sorted(range(len(polished)), key=lambda i: (polished[i].real, polished[i].imag))
    records = []
    for idx in order:
        if used[idx]:
            continue
        z0 = polished[idx]
        orbit = [z0]
        w = mapping(z0)
        for _ in range(p - 1):
            if is_infinite(w) or abs(w - z0) < CYCLE_GROUP_TOL:
                break
            orbit.append(w)
            w = mapping(w)
        period = len(orbit)
        # mark every root that belongs to this cycle
        for zc in orbit:
            for j, rj in enumerate(polished):
                if not used[j] and abs(rj - zc) < CYCLE_GROUP_TOL:
                    used[j] = True
        mult = 1.0 + 0.0j
        degenerate = False
        for zc in orbit:
            try:
                mult *= mapping.derivative(zc)
            except PoleDerivativeError:
                degenerate = True
                break
        if degenerate:
            continue
        rep = min(orbit, key=lambda w_: (w_.real, w_.imag))
        k = orbit.index(rep)
        orbit = orbit[k:] + orbit[:k]
        records.append(CycleRecord(tuple(orbit), period, mult))

    records.sort(key=lambda rec: (rec.period, rec.points[0].real, rec.points[0].imag))
    return records
