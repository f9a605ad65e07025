"""Power-series linearizer of the quadratic z -> lam*z + z^2.

The series phi(zeta) = sum b_m zeta^m, b_1 = 1, solves
phi(lam*zeta) = lam*phi(zeta) + phi(zeta)^2, i.e. the coefficients obey

    b_m (lam^m - lam) = sum_{i+j=m, i,j>=1} b_i b_j.

Small divisors make |b_m|^(1/m) oscillate, so the radius of convergence
(the conformal radius of the linearization domain) is estimated by a
least-squares fit of log|b_m| against m over the top half of the computed
indices, with the top-quarter fit providing the uncertainty.

Orbit classification: a point of the filled set either escapes (|z| > 4,
safe because the filled set lives in the closed 2-disk), enters the
invariant sub-disk of conformal radius rho (detected by inverting the
linearizer), or stays undecided within the step budget.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass
from typing import Optional, Union

import mpmath
import numpy as np
from mpmath import mp

from . import cfrac
from .cfrac import CFExpansion
from .errors import (
    NumericError,
    PreconditionError,
    SmallDivisorError,
    TrustRegionError,
)
from .maps import QuadraticSiegelMap
from .numkit import QUAD256, PrecisionContext

#: escape radius for quadratics; the filled set is inside the closed 2-disk
ESCAPE_RADIUS = 4.0

#: fraction of the estimated radius inside which the inverse series is trusted
TRUST_FACTOR = 0.8

INVERSION_TOL = 1e-10

RotationLike = Union[CFExpansion, float, mpmath.mpf]


@dataclass(frozen=True)
class FitDiagnostics:
    slope: float
    intercept: float
    residual_rms: float
    window: tuple


@dataclass(frozen=True)
class RadiusEstimate:
    value: float
    uncertainty: float
    diverging: bool


@dataclass(frozen=True)
class LinearizerSeries:
    """Truncated linearizer with its radius-of-convergence estimate."""

    alpha_value: mpmath.mpf
    lam: mpmath.mpc
    coefficients: tuple  # (b_1, ..., b_n) as mpc
    bits: int
    radius_estimate: float
    fit_diagnostics: FitDiagnostics
    alpha_cf: Optional[CFExpansion] = None

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    def b(self, m: int) -> mpmath.mpc:
        """Coefficient b_m, 1-based."""
        return self.coefficients[m - 1]

    def eval_mp(self, zeta) -> mpmath.mpc:
        with mpmath.workprec(self.bits):
            z = mp.mpc(zeta)
            acc = mp.mpc(0)
            for c in reversed(self.coefficients):
                acc = acc * z + c
            return acc * z

    def double_truncation(self, rho: float) -> np.ndarray:
        """Coefficients b_1..b_m as complex128, truncated where the tail at
        radius rho falls below 1e-16 of scale; safe against double overflow.
        Results are memoized per rho since orbit classification calls this
        once per step."""
        cache = self.__dict__.setdefault("_trunc_cache", {})
        key = float(rho)
        if key in cache:
            return cache[key]
        coeffs = []
        with mpmath.workprec(self.bits):
            for m, c in enumerate(self.coefficients, start=1):
                mag = abs(c) * mp.mpf(rho) ** m
                if m > 8 and mag < 1e-16:
                    break
                fc = complex(c)
                if not (math.isfinite(fc.real) and math.isfinite(fc.imag)):
                    break
                coeffs.append(fc)
        arr = np.array(coeffs, dtype=complex)
        cache[key] = arr
        return arr

    def map_double(self) -> QuadraticSiegelMap:
        return QuadraticSiegelMap(alpha=float(self.alpha_value), lam=complex(self.lam))


@dataclass(frozen=True)
class OrbitFate:
    """Outcome of iterating one point: escaped, entered_subdisk or undecided."""

    status: str
    steps: int
    entry_step: Optional[int] = None

    def __post_init__(self):
        if self.status not in ("escaped", "entered_subdisk", "undecided"):
            raise PreconditionError(f"unknown fate status {self.status!r}")
        if (self.entry_step is not None) != (self.status == "entered_subdisk"):
            raise PreconditionError("entry_step is present iff status is entered_subdisk")


def _alpha_to_mpf(alpha: RotationLike, ctx: PrecisionContext):
    if isinstance(alpha, CFExpansion):
        if alpha.is_rational:
            raise PreconditionError("rational rotation number: not linearizable")
        return cfrac.value(alpha, ctx), alpha
    with ctx.workprec():
        return +mp.mpf(alpha), None


def linearizer_coeffs(
    alpha: RotationLike,
    n: int,
    ctx: PrecisionContext = QUAD256,
    cache_dir: Optional[str] = None,
) -> LinearizerSeries:
    """First ``n`` linearizer coefficients of z -> lam*z + z^2.

    alpha may be a CFExpansion (recommended: exact surd values) or a raw
    real.  Raises SmallDivisorError when a divisor lam^m - lam underflows
    the working precision.
    """
    if n < 2:
        raise PreconditionError("need n >= 2 coefficients")
    alpha_mp, alpha_cf = _alpha_to_mpf(alpha, ctx)

    cache_path = None
    if cache_dir is not None and alpha_cf is not None:
        key = _cache_key(cfrac.format_cf(alpha_cf), n, ctx.bits)
        cache_path = os.path.join(cache_dir, key + ".hksc")
        cached = _load_coeff_cache(cache_path, n, ctx.bits)
        if cached is not None:
            return _finish_series(alpha_mp, cached, ctx, alpha_cf)

    with ctx.workprec():
        lam = mp.expjpi(2 * alpha_mp)
        tiny = mp.ldexp(1, 16 - ctx.bits)
        b = [mp.mpc(0), mp.mpc(1)]
        lam_pow = lam
        for m in range(2, n + 1):
            lam_pow *= lam
            divisor = lam_pow - lam
            if abs(divisor) < tiny:
                raise SmallDivisorError(
                    f"divisor lam^{m} - lam underflows {ctx.bits}-bit precision"
                )
            half = (m - 1) // 2
            s = mp.mpc(0)
            for i in range(1, half + 1):
                s += b[i] * b[m - i]
            s *= 2
            if m % 2 == 0:
                s += b[m // 2] ** 2
            b.append(s / divisor)
    coeffs = tuple(b[1:])
    if cache_path is not None:
        try:
            os.makedirs(cache_dir, exist_ok=True)
            _write_coeff_cache(cache_path, coeffs, ctx.bits)
        except OSError:
            pass  # cache is best-effort
    return _finish_series(alpha_mp, coeffs, ctx, alpha_cf)


def _finish_series(alpha_mp, coeffs, ctx, alpha_cf) -> LinearizerSeries:
    with ctx.workprec():
        lam = mp.expjpi(2 * alpha_mp)
    n = len(coeffs)
    slope_h, icept, rms, window = _log_growth_fit(coeffs, n // 2, n, ctx.bits)
    return LinearizerSeries(
        alpha_value=alpha_mp,
        lam=lam,
        coefficients=coeffs,
        bits=ctx.bits,
        radius_estimate=math.exp(-slope_h),
        fit_diagnostics=FitDiagnostics(slope_h, icept, rms, window),
        alpha_cf=alpha_cf,
    )


def _log_growth_fit(coeffs, lo, hi, bits):
    """Least-squares slope of log|b_m| over indices [lo, hi] (1-based)."""
    lo = max(lo, 2)
    with mpmath.workprec(bits):
        ms = np.arange(lo, hi + 1, dtype=float)
        logs = np.array(
            [float(mp.log(abs(coeffs[m - 1]))) for m in range(lo, hi + 1)]
        )
    slope, intercept = np.polyfit(ms, logs, 1)
    rms = float(np.sqrt(np.mean((logs - (slope * ms + intercept)) ** 2)))
    return float(slope), float(intercept), rms, (lo, hi)


def conformal_radius_estimate(series: LinearizerSeries) -> RadiusEstimate:
    """Radius estimate with uncertainty from the top-half vs top-quarter fits.

    The diverging flag is raised when the log-growth is super-linear over the
    window (non-Brjuno-like behaviour at this truncation).
    """
    n = series.n_terms
    if n < 64:
        raise PreconditionError("need n_terms >= 64 for a radius estimate")
    s_half, _, _, _ = _log_growth_fit(series.coefficients, n // 2, n, series.bits)
    s_quarter, _, _, _ = _log_growth_fit(series.coefficients, 3 * n // 4, n, series.bits)
    r_half = math.exp(-s_half)
    r_quarter = math.exp(-s_quarter)
    # super-linear growth: the late-window slope clearly exceeds the early one
    s_a, _, _, _ = _log_growth_fit(series.coefficients, n // 2, 3 * n // 4, series.bits)
    diverging = (s_quarter - s_a) > 0.5 * max(1.0, abs(s_a)) and s_quarter > s_a + 0.25
    return RadiusEstimate(
        value=r_half,
        uncertainty=abs(r_half - r_quarter),
        diverging=diverging,
    )


def invert_linearizer(series: LinearizerSeries, z: complex, rho: float):
    """Solve phi(zeta) = z for |zeta| < rho inside the trust region.

    Returns the preimage zeta or None when no solution exists in the trust
    region.  rho must not exceed 0.8 * radius_estimate, and the series
    truncation error at |zeta| = rho must be below 1e-10.
    """
    _check_trust(series, rho)
    coeffs = series.double_truncation(1.25 * rho)
    z = complex(z)
    zeta = z  # phi'(0) = 1, so the identity is the natural seed
    if abs(zeta) > rho:
        zeta *= rho / abs(zeta)
    for _ in range(60):
        val, dval = _horner_with_derivative(coeffs, zeta)
        f = val - z
        if abs(f) < INVERSION_TOL and abs(zeta) < rho:
            return zeta
        if dval == 0:
            return None
        step = f / dval
        zeta_new = zeta - step
        if not (math.isfinite(zeta_new.real) and math.isfinite(zeta_new.imag)):
            return None
        # keep the iterate inside the trust disk; escape means no preimage here
        if abs(zeta_new) > 1.2 * rho:
            zeta_new *= (1.2 * rho) / abs(zeta_new)
        zeta = zeta_new
    val, _ = _horner_with_derivative(coeffs, zeta)
    if abs(val - z) < INVERSION_TOL and abs(zeta) < rho:
        return zeta
    return None


def _check_trust(series: LinearizerSeries, rho: float):
    limit = TRUST_FACTOR * series.radius_estimate
    if not 0 < rho <= limit:
        raise TrustRegionError(
            f"rho = {rho} outside the trust region (0, {limit:.6g}]"
        )
    cache = series.__dict__.setdefault("_trust_cache", {})
    if float(rho) in cache:
        return
    # tail bound at |zeta| = rho from the last stored coefficient
    with mpmath.workprec(series.bits):
        tail = abs(series.coefficients[-1]) * mp.mpf(rho) ** series.n_terms
        ratio = rho / series.radius_estimate
        tail = float(tail / (1 - ratio)) if ratio < 1 else float(tail)
    if tail > INVERSION_TOL:
        raise NumericError(
            f"series truncation error {tail:.3g} at |zeta|=rho exceeds {INVERSION_TOL}"
        )
    cache[float(rho)] = True


def _horner_with_derivative(coeffs: np.ndarray, zeta: complex):
    # phi(zeta) = zeta * P(zeta) with P from b_1..b_m
    p = 0.0j
    dp = 0.0j
    for c in coeffs[::-1]:
        dp = dp * zeta + p
        p = p * zeta + c
    val = zeta * p
    dval = p + zeta * dp
    return val, dval


def subdisk_boundary(series: LinearizerSeries, rho: float, samples: int = 1024) -> np.ndarray:
    """Sampled boundary phi(rho * e^{2 pi i theta}) of the invariant sub-disk."""
    _check_trust(series, rho)
    coeffs = series.double_truncation(rho)
    theta = np.arange(samples) / samples
    zeta = rho * np.exp(2j * np.pi * theta)
    acc = np.zeros_like(zeta)
    for c in coeffs[::-1]:
        acc = acc * zeta + c
    return acc * zeta


def classify_orbit_LM(
    alpha: RotationLike,
    z0: complex,
    rho: float,
    k_max: int,
    series: LinearizerSeries,
) -> OrbitFate:
    """Iterate the quadratic and classify the orbit of ``z0``.

    escaped: |z| exceeded 4 (outside the filled set); entered_subdisk: the
    first step whose point has a linearizer preimage with |zeta| < rho;
    undecided: neither within k_max steps.  ``alpha`` must agree with the
    rotation number the series was built for.
    """
    _check_trust(series, rho)
    alpha_f = _alpha_float(alpha)
    if abs((alpha_f - float(series.alpha_value) + 0.5) % 1.0 - 0.5) > 1e-9:
        raise PreconditionError("alpha disagrees with the series' rotation number")
    mapping = series.map_double()
    z = complex(z0)
    for k in range(k_max + 1):
        if abs(z) > ESCAPE_RADIUS:
            return OrbitFate("escaped", steps=k)
        if abs(z) < 2.5 and invert_linearizer(series, z, rho) is not None:
            return OrbitFate("entered_subdisk", steps=k, entry_step=k)
        z = mapping(z)
    return OrbitFate("undecided", steps=k_max)


def _alpha_float(alpha: RotationLike) -> float:
    if isinstance(alpha, CFExpansion):
        return float(cfrac.value(alpha, PrecisionContext(64)))
    return float(alpha)


def fate_grid_csv(points, fates) -> str:
    """CSV emitter for fate grids: re,im,status,steps,entry_step."""
    lines = ["re,im,status,steps,entry_step"]
    for z, fate in zip(points, fates):
        entry = "" if fate.entry_step is None else str(fate.entry_step)
        lines.append(f"{complex(z).real!r},{complex(z).imag!r},{fate.status},{fate.steps},{entry}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# coefficient cache: binary records (index, real bits, imag bits)

_CACHE_MAGIC = b"HKSC01"


def _cache_key(digit_string: str, n_terms: int, bits: int) -> str:
    payload = f"{digit_string}|{n_terms}|{bits}".encode()
    return hashlib.sha256(payload).hexdigest()[:32]


def _pack_mpf(x) -> bytes:
    sign, man, exp, _ = mp.mpf(x)._mpf_
    man_bytes = man.to_bytes((man.bit_length() + 7) // 8 or 1, "little")
    return struct.pack("<bqI", sign, exp, len(man_bytes)) + man_bytes


def _unpack_mpf(buf: memoryview, off: int):
    sign, exp, n = struct.unpack_from("<bqI", buf, off)
    off += struct.calcsize("<bqI")
    man = int.from_bytes(bytes(buf[off : off + n]), "little")
    off += n
    val = mp.ldexp(man, exp)
    return (-val if sign else val), off


def _write_coeff_cache(path: str, coeffs, bits: int):
    with mpmath.workprec(bits):
        blob = bytearray()
        blob += _CACHE_MAGIC
        blob += struct.pack("<II", bits, len(coeffs))
        for idx, c in enumerate(coeffs, start=1):
            blob += struct.pack("<I", idx)
            blob += _pack_mpf(mp.re(c))
            blob += _pack_mpf(mp.im(c))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    os.replace(tmp, path)


def _load_coeff_cache(path: str, n_terms: int, bits: int):
    try:
        with open(path, "rb") as fh:
            buf = memoryview(fh.read())
        if bytes(buf[:6]) != _CACHE_MAGIC:
            return None
        file_bits, count = struct.unpack_from("<II", buf, 6)
        if file_bits != bits or count != n_terms:
            return None
        off = 6 + 8
        coeffs = []
        with mpmath.workprec(bits):
            for k in range(1, count + 1):
                (idx,) = struct.unpack_from("<I", buf, off)
                off += 4
                if idx != k:
                    return None
                re, off = _unpack_mpf(buf, off)
                im, off = _unpack_mpf(buf, off)
                coeffs.append(mp.mpc(re, im))
        return tuple(coeffs)
    except (OSError, struct.error, ValueError):
        return None
