"""Continued-fraction arithmetic.

Expansions are stored exactly: an integer part, a finite tuple of certified
partial quotients, and an optional periodic tail.  Everything downstream
(convergents, Brjuno partial sums, the perturbation digit sequences
``[a_0; a_1..a_n, A_n, N, N, ...]``) is computed from this representation
with exact integers; numerical values leave the exact world only at the very
end, at an explicit precision.

Digit-string syntax shared with the CLI: ``"a0;d1,d2,[t1,t2]"`` where the
square brackets mark the periodic tail, e.g. the golden mean is ``"0;[1]"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import mpmath
from mpmath import mp

from .errors import (
    PreconditionError,
    PrecisionExhaustedError,
    UnsupportedRepresentationError,
)
from .numkit import QUAD256, PrecisionContext

RealLike = Union[int, float, Fraction, mpmath.mpf]


@dataclass(frozen=True)
class CFExpansion:
    """Continued fraction [a0; a1, a2, ...] with optional periodic tail.

    ``digits`` holds the certified prefix a_1..a_m.  If ``tail`` is nonempty
    the expansion continues forever by repeating it.  ``terminated`` marks an
    exact rational whose expansion ends after the prefix.
    """

    a0: int = 0
    digits: tuple = ()
    tail: tuple = ()
    terminated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        object.__setattr__(self, "tail", tuple(int(d) for d in self.tail))
        if any(d < 1 for d in self.digits) or any(d < 1 for d in self.tail):
            raise PreconditionError("partial quotients a_n must be >= 1 for n >= 1")
        if self.terminated and self.tail:
            raise PreconditionError("a terminated expansion cannot carry a periodic tail")

    @property
    def is_rational(self) -> bool:
        return self.terminated

    @property
    def is_eventually_periodic(self) -> bool:
        return bool(self.tail)

    def available(self) -> Optional[int]:
        """Number of digits available; None means unbounded (periodic tail)."""
        return None if self.tail else len(self.digits)

    def digit(self, n: int) -> int:
        """Partial quotient a_n, 1-based."""
        if n < 1:
            raise PreconditionError("digit index is 1-based")
        if n <= len(self.digits):
            return self.digits[n - 1]
        if self.tail:
            return self.tail[(n - len(self.digits) - 1) % len(self.tail)]
        raise PreconditionError(f"digit a_{n} is not available in this expansion")

    def prefix(self, n: int) -> tuple:
        return tuple(self.digit(k) for k in range(1, n + 1))

    def __str__(self) -> str:
        return format_cf(self)


GOLDEN = CFExpansion(0, (), (1,))


def parse_cf(text: str) -> CFExpansion:
    """Parse the digit-string syntax ``a0;d1,d2,[t1,t2]``."""
    s = text.strip()
    if ";" not in s:
        raise PreconditionError(f"bad continued-fraction syntax {text!r}: missing ';'")
    head, rest = s.split(";", 1)
    try:
        a0 = int(head)
    except ValueError as exc:
        raise PreconditionError(f"bad integer part in {text!r}") from exc
    rest = rest.strip()
    tail: tuple = ()
    if "[" in rest:
        body, tail_part = rest.split("[", 1)
        if not tail_part.endswith("]"):
            raise PreconditionError(f"unclosed periodic tail in {text!r}")
        tail = tuple(int(t) for t in tail_part[:-1].split(",") if t.strip())
        if not tail:
            raise PreconditionError(f"empty periodic tail in {text!r}")
        rest = body.rstrip().rstrip(",")
    digits = tuple(int(d) for d in rest.split(",") if d.strip())
    return CFExpansion(a0, digits, tail, terminated=False)


def format_cf(cf: CFExpansion) -> str:
    parts = ",".join(str(d) for d in cf.digits)
    if cf.tail:
        tail = "[" + ",".join(str(t) for t in cf.tail) + "]"
        parts = parts + "," + tail if parts else tail
    return f"{cf.a0};{parts}"


@dataclass(frozen=True)
class ConvergentTable:
    """Rows (n, p_n, q_n) of the convergents a0 + p_n/q_n."""

    rows: tuple  # of (n, p, q) triples, exact ints

    def q(self, n: int) -> int:
        return self.rows[n - 1][2]

    def p(self, n: int) -> int:
        return self.rows[n - 1][1]

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        lines = ["n,p,q"]
        lines += [f"{n},{p},{q}" for (n, p, q) in self.rows]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TypeReport:
    """Prefix-only digit statistics; asymptotic class membership is not
    decidable from finite data and is never claimed."""

    prefix_len: int
    N: int
    bounded_type_on_prefix: bool
    min_digit: int
    in_HT_N_prefix: bool
    pz_prefix_ratio: float
    scope: str = field(default="prefix-only")


def _to_fraction(x: RealLike) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, mpmath.mpf):
        if not mp.isfinite(x):
            raise PreconditionError("x must be finite")
        sign, man, exp, _ = x._mpf_
        man, exp = int(man), int(exp)  # gmpy backend hands out mpz
        if man == 0:
            return Fraction(0)
        val = Fraction(man) * (Fraction(2) ** exp)
        return -val if sign else val
    raise PreconditionError(f"unsupported real type {type(x)!r}")


def _ulp_of(x: RealLike, bits: Optional[int]) -> Optional[Fraction]:
    """Uncertainty half-width for digit certification; None means exact."""
    if isinstance(x, (int, Fraction)):
        return None
    if isinstance(x, float):
        return Fraction(math.ulp(x) if x != 0 else math.ulp(0.0))
    if isinstance(x, mpmath.mpf):
        prec = bits if bits is not None else mp.prec
        if x == 0:
            return Fraction(2) ** (-prec)
        mag = int(mp.floor(mp.log(abs(x), 2)))
        return Fraction(2) ** (mag + 1 - prec)
    raise PreconditionError(f"unsupported real type {type(x)!r}")


def _expand_exact(x: Fraction, n: int):
    digits = []
    a0 = math.floor(x)
    rem = x - a0
    terminated = rem == 0
    while len(digits) < n and rem != 0:
        rem = 1 / rem
        d = math.floor(rem)
        rem = rem - d
        digits.append(int(d))
        if rem == 0:
            terminated = True
    return a0, digits, terminated


def expand(x: RealLike, n: int, ctx: Optional[PrecisionContext] = None) -> CFExpansion:
    """First ``n`` partial quotients of ``x``.

    Exact inputs (int, Fraction) expand by plain Euclid and set the
    termination flag when the expansion ends.  Inexact inputs are treated as
    the interval [x-ulp, x+ulp]; a digit is emitted only when the whole
    interval maps to a single integer part, otherwise
    PrecisionExhaustedError is raised.
    """
    if n < 1:
        raise PreconditionError("expand needs n >= 1")
    ulp = _ulp_of(x, ctx.bits if ctx else None)
    xf = _to_fraction(x)
    if ulp is None:
        a0, digits, terminated = _expand_exact(xf, n)
        return CFExpansion(a0, tuple(digits), (), terminated=terminated)

    lo, hi = xf - ulp, xf + ulp
    a0_lo, a0_hi = math.floor(lo), math.floor(hi)
    if a0_lo != a0_hi:
        raise PrecisionExhaustedError("cannot certify the integer part of x")
    a0 = a0_lo
    lo, hi = lo - a0, hi - a0
    digits = []
    while len(digits) < n:
        if lo <= 0:
            raise PrecisionExhaustedError(
                f"precision exhausted after {len(digits)} digits: interval touches a rational"
            )
        lo, hi = 1 / hi, 1 / lo
        d_lo, d_hi = math.floor(lo), math.floor(hi)
        if d_lo != d_hi:
            raise PrecisionExhaustedError(
                f"precision exhausted after {len(digits)} digits: "
                f"digit undecided between {d_lo} and {d_hi}"
            )
        digits.append(int(d_lo))
        lo, hi = lo - d_lo, hi - d_lo
    return CFExpansion(a0, tuple(digits), (), terminated=False)


def convergents(cf: CFExpansion, n: int) -> ConvergentTable:
    """Table of (k, p_k, q_k) for k = 1..n, exact big integers."""
    avail = cf.available()
    if avail is not None and n > avail:
        raise PreconditionError(f"only {avail} digits available, {n} requested")
    rows = []
    p_prev, p = 1, 0  # p_{-1}, p_0
    q_prev, q = 0, 1  # q_{-1}, q_0
    for k in range(1, n + 1):
        a = cf.digit(k)
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        rows.append((k, p, q))
    return ConvergentTable(tuple(rows))


def value(cf: CFExpansion, ctx: PrecisionContext = QUAD256) -> mpmath.mpf:
    """Numerical value of the expansion, correct to the context precision.

    Finite prefixes give the exact rational of the prefix; an eventually
    periodic tail gives the quadratic surd.  A bare expansion with no digits,
    no tail and no termination flag declares an unknown continuation and
    raises UnsupportedRepresentationError.
    """
    if not cf.terminated and not cf.tail and not cf.digits:
        raise UnsupportedRepresentationError(
            "expansion is neither finite nor eventually periodic"
        )
    with mpmath.workprec(ctx.bits + 32):
        y = _tail_surd(cf.tail) if cf.tail else None
        p_prev, p = 1, cf.a0  # convergents of [a0; d1..dk]
        q_prev, q = 0, 1
        for d in cf.digits:
            p_prev, p = p, d * p + p_prev
            q_prev, q = q, d * q + q_prev
        if y is None:
            result = mp.mpf(p) / q
        else:
            # next complete quotient is 1/y, so x = (p + y*p_prev)/(q + y*q_prev)
            result = (p + y * p_prev) / (q + y * q_prev)
    return ctx.mpf(result)


def value_fraction(cf: CFExpansion) -> Fraction:
    """Exact rational value of the (finite) prefix."""
    p_prev, p = 1, cf.a0
    q_prev, q = 0, 1
    for d in cf.digits:
        p_prev, p = p, d * p + p_prev
        q_prev, q = q, d * q + q_prev
    return Fraction(p, q)


def _tail_surd(tail: Sequence[int]):
    """Value y = [0; t1, t2, ..., tk, t1, ...] of a purely periodic tail.

    y is the attracting fixed point of the Moebius map with matrix
    prod_i [[0,1],[1,t_i]]; solved exactly via the quadratic formula.
    """
    A, B, C, D = 1, 0, 0, 1
    for t in tail:
        # multiply on the right by [[0,1],[1,t]]
        A, B = B, A + B * t
        C, D = D, C + D * t
    # y = (A y + B)/(C y + D)
    disc = (D - A) * (D - A) + 4 * C * B
    y = (mp.mpf(A - D) + mp.sqrt(mp.mpf(disc))) / (2 * C)
    return y


def brjuno_partial_sum(cf: CFExpansion, n: int) -> float:
    """Partial sum sum_{k=1..n} log(q_{k+1})/q_k of the Brjuno series."""
    if n < 0:
        raise PreconditionError("n must be >= 0")
    if n == 0:
        return 0.0
    table = convergents(cf, n + 1)
    total = 0.0
    for k in range(1, n + 1):
        q_k = table.q(k)
        q_next = table.q(k + 1)
        if q_k.bit_length() > 1000:
            # log(q_{k+1})/q_k is far below double resolution here
            continue
        total += math.log(q_next) / q_k
    return total


def classify(cf: CFExpansion, prefix_len: int, N: int) -> TypeReport:
    """Digit statistics of the first ``prefix_len`` quotients.

    bounded_type_on_prefix means every prefix digit is <= N; in_HT_N_prefix
    means every prefix digit is >= N.  Both are prefix-only statements.
    """
    if prefix_len < 1:
        raise PreconditionError("prefix_len must be >= 1")
    digits = cf.prefix(prefix_len)
    min_digit = min(digits)
    max_digit = max(digits)
    pz = max(math.log(d) / math.sqrt(k) for k, d in enumerate(digits, start=1))
    return TypeReport(
        prefix_len=prefix_len,
        N=N,
        bounded_type_on_prefix=max_digit <= N,
        min_digit=min_digit,
        in_HT_N_prefix=min_digit >= N,
        pz_prefix_ratio=pz,
    )


def compute_A_n(ratio, q_n: int) -> int:
    """Exact floor of ratio**q_n for ratio > 1.

    Rational ratios are computed with exact integers.  Inexact ratios are
    certified by recomputing at two precisions; disagreement raises
    PrecisionExhaustedError.
    """
    if q_n < 1:
        raise PreconditionError("q_n must be >= 1")
    if isinstance(ratio, (int, Fraction)):
        frac = Fraction(ratio)
        if frac <= 1:
            raise PreconditionError("ratio must be > 1")
        return (frac.numerator**q_n) // (frac.denominator**q_n)
    xf = mp.mpf(ratio) if not isinstance(ratio, mpmath.mpf) else ratio
    if not xf > 1:
        raise PreconditionError("ratio must be > 1")
    needed = int(q_n * mp.log(xf, 2)) + 64
    floors = []
    for extra in (0, 64):
        with mpmath.workprec(needed + extra):
            floors.append(int(mp.floor(mp.mpf(ratio) ** q_n)))
    if floors[0] != floors[1]:
        raise PrecisionExhaustedError("cannot certify floor(ratio**q_n)")
    return floors[0]


def to_float(alpha) -> float:
    """Double value of a rotation number given as CFExpansion or real."""
    if isinstance(alpha, CFExpansion):
        return float(value(alpha, PrecisionContext(64)))
    return float(alpha)


def abc_sequence_number(alpha: CFExpansion, n: int, A_n: int, N: int) -> CFExpansion:
    """The perturbed number [a_0; a_1..a_n, A_n, N, N, N, ...]."""
    if A_n < 1 or N < 1:
        raise PreconditionError("A_n and N must be >= 1")
    prefix = alpha.prefix(n) if n > 0 else ()
    return CFExpansion(alpha.a0, prefix + (int(A_n),), (int(N),))
