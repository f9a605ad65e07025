"""Rotation numbers of analytic circle maps and parameter solving t(alpha).

The estimator lifts the orbit angle by nearest-branch continuation and
refines the Birkhoff quotient (theta_n - theta_0)/n at the denominator
times q_k of the running estimate's continued fraction, where the error
decays like 1/q_k^2 instead of 1/n.  A lift step deviating from the mean by
more than 1/2 aborts with diagnostics: a silently wrong lift is worse than
no answer.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cfrac
from .cfrac import CFExpansion
from .errors import (
    CircleInvarianceError,
    LiftJumpError,
    NoConvergenceError,
    NonMonotoneFamilyError,
    PreconditionError,
)
from .maps import BlaschkeMap, RotationMap
from .numkit import PrecisionContext

CIRCLE_TOL = 1e-9
MIN_ITER = 1000


@dataclass(frozen=True)
class RotationEstimate:
    value: float  # in [0, 1)
    error_bound: float
    iterations: int
    method: str  # "birkhoff" or "convergent_accelerated"


@dataclass(frozen=True)
class LiftedOrbit:
    theta0: float
    thetas: np.ndarray  # lifted angles, length n_iter + 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.thetas)


def _circle_map_angle_steps(mapping, theta0: float, n_iter: int) -> np.ndarray:
    z = cmath.exp(2j * math.pi * theta0)
    steps = np.empty(n_iter)
    for k in range(n_iter):
        w = mapping(z)
        r = abs(w)
        if abs(r - 1.0) > CIRCLE_TOL:
            raise CircleInvarianceError(
                f"||f(e^(2 pi i theta))| - 1| = {abs(r - 1.0):.3g} at step {k}"
            )
        w /= r
        steps[k] = cmath.phase(w / z) / (2.0 * math.pi)
        z = w
    return steps


def rebranch_steps(raw: np.ndarray) -> np.ndarray:
    """Shift principal-branch angle steps by integers toward their circular
    mean, so a step family straddling the +-1/2 wrap boundary is lifted
    consistently.  Raises LiftJumpError when some step still deviates from
    the mean by >= 1/2 (the branch is genuinely ambiguous)."""
    mean_angle = math.atan2(
        float(np.mean(np.sin(2 * np.pi * raw))),
        float(np.mean(np.cos(2 * np.pi * raw))),
    ) / (2 * math.pi)
    steps = raw - np.round(raw - mean_angle)
    mean = float(np.mean(steps))
    worst = int(np.argmax(np.abs(steps - mean)))
    dev = abs(float(steps[worst]) - mean)
    if dev >= 0.5:
        raise LiftJumpError(
            f"lift step {worst} deviates from the mean by {dev:.3f} >= 1/2; "
            "branch not trustworthy"
        )
    return steps


def lift_orbit(mapping, theta0: float, n_iter: int) -> LiftedOrbit:
    """Continuous lift of the orbit angle; checks the no-branch-jump bound."""
    if n_iter < MIN_ITER:
        raise PreconditionError(f"need n_iter >= {MIN_ITER}")
    if isinstance(mapping, BlaschkeMap) and not mapping.is_circle_symmetric:
        raise PreconditionError(
            "family does not preserve the unit circle (a must be real with a >= 3)"
        )
    raw = _circle_map_angle_steps(mapping, theta0, n_iter)
    steps = rebranch_steps(raw)
    thetas = np.concatenate(([theta0], theta0 + np.cumsum(steps)))
    return LiftedOrbit(theta0=theta0, thetas=thetas)


def _fractional(x: float) -> float:
    return x % 1.0


def _denominators_of(value: float, limit: int) -> list:
    """Convergent denominators of ``value`` not exceeding ``limit``.

    Plain float Gauss map without certification: these q only pick sampling
    times, and a wrong late digit merely makes the sampling suboptimal.
    """
    x = value % 1.0
    qs = []
    q_prev, q = 0, 1
    for _ in range(48):
        if x < 1e-13:
            break
        x = 1.0 / x
        a = int(x)
        if a < 1 or a > 10**12:
            break
        x -= a
        q_prev, q = q, a * q + q_prev
        if q > limit:
            break
        if q > 1:
            qs.append(q)
    return qs


def estimate_from_lift(lift: LiftedOrbit, method: str = "convergent_accelerated") -> RotationEstimate:
    """Rotation number from a lifted orbit.

    The convergent-accelerated method refines in stages: the continued
    fraction of the running estimate is trusted only up to denominators
    that its current error can certify, the quotient is re-read at the
    largest trusted denominator time, and the trust region grows with the
    improved estimate.  The error bound is the spread of the approximants
    at the last three trusted denominators (with a 1/q^2 floor).
    """
    thetas = lift.thetas
    n = len(thetas) - 1
    raw = (thetas[-1] - thetas[0]) / n
    if method == "birkhoff":
        value = _fractional(raw)
        err = 2.0 / n
        if 1.0 - value < err:
            value = 0.0
        return RotationEstimate(value, err, n, "birkhoff")
    if method != "convergent_accelerated":
        raise PreconditionError(f"unknown method {method!r}")

    def at_time(q: int) -> float:
        return (thetas[q] - thetas[0]) / q

    est = raw
    err = 2.0 / n
    used = [n]
    for _stage in range(8):
        # digits of est are certified while q_k q_{k+1} < 1/(2 err)
        q_trust = int(math.sqrt(0.25 / err)) if err > 0 else n
        qs = [q for q in _denominators_of(_fractional(est), min(n, q_trust))]
        if not qs or qs[-1] <= used[-1] and used[-1] != n:
            break
        q = qs[-1]
        new = at_time(q)
        # align the fractional estimate with the previous lift-rate value
        new = new + round(est - new)
        err_new = max(abs(new - est), 1.0 / q**2, 5e-15)
        if q == used[-1] or (used[-1] != n and q < used[-1]):
            break
        used.append(q)
        est, err = new, min(err, err_new) if q > n // 2 else err_new
        if q >= n // 2:
            break

    qs = _denominators_of(_fractional(est), n)
    tail = [q for q in qs if q >= 2][-3:]
    if len(tail) >= 2:
        ests = [_fractional(at_time(q)) for q in tail]
        ref = ests[-1]
        spread = max(abs((e - ref + 0.5) % 1.0 - 0.5) for e in ests)
        value = ref
        err = max(spread, 1.0 / tail[-1] ** 2, 5e-15)
    else:
        value = _fractional(est)
        err = max(err, 2.0 / n)
    if 1.0 - value < err:
        value = 0.0
    return RotationEstimate(value, err, n, "convergent_accelerated")


def rotation_number(
    mapping,
    theta0: float = 0.0,
    n_iter: int = 100_000,
    method: str = "convergent_accelerated",
) -> RotationEstimate:
    """Rotation number of a circle-preserving map from the point theta0."""
    lift = lift_orbit(mapping, theta0, n_iter)
    return estimate_from_lift(lift, method)


def invariance_residual(mapping, samples: int) -> float:
    """max over sampled theta of ||f(e^(2 pi i theta))| - 1|."""
    if samples < 1:
        raise PreconditionError("need samples >= 1")
    theta = np.arange(samples) / samples
    z = np.exp(2j * np.pi * theta)
    w = mapping.eval_array(z)
    return float(np.max(np.abs(np.abs(w) - 1.0)))


def circular_distance(x: float, y: float) -> float:
    return abs((x - y + 0.5) % 1.0 - 0.5)


@dataclass
class SolveDiagnostics:
    bracket: tuple
    evaluations: int = 0
    history: list = field(default_factory=list)


def rho_scan(family: BlaschkeMap, ts, n_iter: int = 4000, theta0: float = 0.12345):
    """Rotation numbers along a t-grid, for staircase plots and CSV dumps."""
    out = []
    for t in ts:
        est = rotation_number(BlaschkeMap(t=float(t), a=family.a), theta0, n_iter)
        out.append((float(t), est.value, est.error_bound))
    return out


def scan_csv(rows) -> str:
    lines = ["t,rho,error_bound"]
    lines += [f"{t!r},{rho!r},{err!r}" for (t, rho, err) in rows]
    return "\n".join(lines) + "\n"


def solve_param_for_rotation(
    family: BlaschkeMap,
    alpha: CFExpansion,
    tol: float = 1e-8,
    n_iter_max: int = 600_000,
    grid: int = 17,
    full_output: bool = False,
):
    """Solve rho(f_t) = alpha for t by bisection on the monotone family.

    alpha must be an irrational continued fraction (rational targets sit on
    mode-locking plateaus and are refused).  The family's monotonicity in t
    is verified on a coarse grid before bisecting.
    """
    if not isinstance(alpha, CFExpansion):
        raise PreconditionError("target rotation number must be a CFExpansion")
    if alpha.is_rational or (not alpha.tail and not alpha.digits):
        raise PreconditionError("rational target refused: rotation targets must be irrational")
    if not alpha.tail and len(alpha.digits) < 12:
        raise PreconditionError("need at least 12 digits to treat the target as irrational")
    target = float(cfrac.value(alpha, PrecisionContext(64)))
    if not 0.0 < target < 1.0:
        raise PreconditionError("target must lie in (0, 1)")
    if not (isinstance(family, BlaschkeMap) and family.is_circle_symmetric):
        raise PreconditionError("family must preserve the circle: real a >= 3")

    theta0 = 0.12345
    coarse_n = 4000
    ts = np.linspace(0.0, 1.0, grid, endpoint=False)
    coarse = []
    for t in ts:
        est = rotation_number(BlaschkeMap(t=float(t), a=family.a), theta0, coarse_n)
        coarse.append(est)
    for i in range(len(ts) - 1):
        r1, r2 = coarse[i].value, coarse[i + 1].value
        allowance = coarse[i].error_bound + coarse[i + 1].error_bound + 2e-3
        if r1 > 0.85 and r2 < 0.15:
            continue  # rho wraps past 1 near the top of the t range
        if r2 < r1 - allowance:
            raise NonMonotoneFamilyError(
                f"rho decreased between t={ts[i]:.4f} and t={ts[i + 1]:.4f}"
            )

    lo, hi = 0.0, 1.0
    for i in range(len(ts) - 1):
        if coarse[i].value <= target <= coarse[i + 1].value:
            lo, hi = float(ts[i]), float(ts[i + 1])
            break
    else:
        if target >= coarse[-1].value:
            lo = float(ts[-1])

    diag = SolveDiagnostics(bracket=(lo, hi))
    best_t, best_diff = None, math.inf
    for depth in range(80):
        mid = 0.5 * (lo + hi)
        n_iter = min(n_iter_max, int(20000 * 2 ** (depth // 6)))
        est = rotation_number(BlaschkeMap(t=mid, a=family.a), theta0, n_iter)
        diag.evaluations += 1
        diag.history.append((mid, est.value, est.error_bound))
        diff = circular_distance(est.value, target)
        if diff < best_diff:
            best_t, best_diff = mid, diff
        if diff + est.error_bound < tol:
            diag.bracket = (lo, hi)
            return (mid, diag) if full_output else mid
        if est.value < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    if best_t is not None and best_diff < tol:
        diag.bracket = (lo, hi)
        return (best_t, diag) if full_output else best_t
    raise NoConvergenceError(
        f"bisection exhausted: best |rho - alpha| = {best_diff:.3g} (tol {tol})",
        best=best_t,
    )
