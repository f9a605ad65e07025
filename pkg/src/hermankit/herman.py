"""Herman-ring diagnostics for the cubic family.

The ring of the cubic separates 0 from infinity, so the angular winding of
an interior orbit about 0 measures the rotation number directly; the
invariant-curve conjugacy h(theta + alpha) = Q(h(theta)) is solved by a
quasi-Newton iteration in Fourier space, where the linearized twisted
equation reduces (through the substitution delta = h' * w) to a plain
cohomological equation with diagonal small divisors e^{2 pi i k alpha} - 1.
The conjugacy is unique only up to a rotation of the parameter, so the
phase of mode c_1 is zeroed after every step.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import cfrac, circle, siegel
from .cfrac import CFExpansion
from .errors import (
    LiftJumpError,
    NoConvergenceError,
    NoRingFoundError,
    OrbitEscapeError,
    PreconditionError,
    SeedLostError,
    SmallDivisorError,
)
from .maps import CubicHermanMap, CycleRecord, periodic_points
from .numkit import QUAD256, PrecisionContext

RING_INNER = 1e-6
RING_OUTER = 1e6
DEFAULT_WINDOW = (-1.5 - 1.5j, 1.5 + 1.5j)
SMALL_DIVISOR_FLOOR = 1e-12
MAX_TRUNCATION = 4096


@dataclass(frozen=True)
class WindingEstimate:
    """Rotation number measured as cumulative winding about the origin."""

    value: float  # in [0, 1)
    iterations: int
    error_bound: float
    center: complex = 0.0
    lift_ok: bool = True


@dataclass(frozen=True)
class FourierCurve:
    """Invariant curve h(theta) = sum c_k e^{2 pi i k theta}, |k| <= M."""

    modes: np.ndarray  # length 2M+1, k = -M..M
    M: int
    alpha: float
    residual: float

    def mode(self, k: int) -> complex:
        if abs(k) > self.M:
            return 0.0j
        return complex(self.modes[k + self.M])

    def eval_at(self, thetas: np.ndarray) -> np.ndarray:
        ks = np.arange(-self.M, self.M + 1)
        return np.exp(2j * np.pi * np.outer(np.atleast_1d(thetas), ks)) @ self.modes

    def sample(self, L: int) -> np.ndarray:
        """Values on the uniform grid j/L via padded FFT."""
        ks = np.arange(-self.M, self.M + 1)
        spec = np.zeros(max(L, 2 * self.M + 2), dtype=complex)
        spec[ks % len(spec)] += self.modes
        pts = np.fft.ifft(spec) * len(spec)
        if len(spec) != L:
            thetas = np.arange(L) / L
            return self.eval_at(thetas)
        return pts

    def winding_number(self, center: complex = 0.0, L: int = 2048) -> int:
        pts = self.sample(L) - center
        dphi = np.angle(np.roll(pts, -1) / pts)
        return int(round(float(np.sum(dphi)) / (2.0 * math.pi)))


@dataclass(frozen=True)
class ABCRow:
    n: int
    A_n: int
    alpha_n: CFExpansion
    r_estimate: float
    uncertainty: float


@dataclass(frozen=True)
class ABCResult:
    rows: tuple
    r_alpha_hat: float
    r_alpha_uncertainty: float
    r0_hat: float
    ratio: float
    N: int


@dataclass(frozen=True)
class CycleProximity:
    cycle: CycleRecord
    distance: float
    side: str  # "exterior" or "interior"


@dataclass(frozen=True)
class RefineResult:
    u: complex
    rotation_residual: float
    evaluations: int


def find_ring_seed(
    mapping: CubicHermanMap,
    window=DEFAULT_WINDOW,
    budget: int = 2000,
    orbit_len: int = 10_000,
    rng_seed: int = 0,
) -> complex:
    """A point whose orbit stays in the ring annulus with minimal radial spread.

    Candidates are drawn uniformly from the window; survivors keep their
    whole orbit inside 1e-6 < |z| < 1e6 for ``orbit_len`` steps, and the
    winner minimizes the log-radial spread over the second half of the
    orbit (the transient may still be wandering toward the ring).
    """
    if budget < 1000:
        raise PreconditionError("budget must be at least 10^3 candidate points")
    lo, hi = complex(window[0]), complex(window[1])
    rng = np.random.default_rng(rng_seed)
    pts = lo.real + (hi.real - lo.real) * rng.random(budget) + 1j * (
        lo.imag + (hi.imag - lo.imag) * rng.random(budget)
    )
    z = pts.copy()
    alive = np.ones(budget, dtype=bool)
    log_min = np.full(budget, np.inf)
    log_max = np.full(budget, -np.inf)
    half = orbit_len // 2
    with np.errstate(all="ignore"):
        for k in range(orbit_len):
            z[alive] = mapping.eval_array(z[alive])
            az = np.abs(z)
            alive &= np.isfinite(az) & (az > RING_INNER) & (az < RING_OUTER)
            if k >= half:
                m = alive
                lz = np.log(az[m])
                log_min[m] = np.minimum(log_min[m], lz)
                log_max[m] = np.maximum(log_max[m], lz)
    if not alive.any():
        raise NoRingFoundError(
            f"no candidate of {budget} stayed in the annulus for {orbit_len} steps"
        )
    spread = np.where(alive, log_max - log_min, np.inf)
    return complex(pts[int(np.argmin(spread))])


def _winding_lift(mapping, seed: complex, n_iter: int) -> np.ndarray:
    z = complex(seed)
    if not RING_INNER < abs(z) < RING_OUTER:
        raise OrbitEscapeError("seed is outside the ring annulus")
    raw = np.empty(n_iter)
    theta0 = cmath.phase(z) / (2.0 * math.pi)
    for k in range(n_iter):
        w = mapping(z)
        aw = abs(w)
        if not (RING_INNER < aw < RING_OUTER) or not cmath.isfinite(w):
            raise OrbitEscapeError(f"orbit left the annulus at step {k + 1}")
        raw[k] = cmath.phase(w / z) / (2.0 * math.pi)
        z = w
    steps = circle.rebranch_steps(raw)
    return np.concatenate(([theta0], theta0 + np.cumsum(steps)))


def winding_rotation_number(mapping, seed: complex, n_iter: int = 100_000) -> WindingEstimate:
    """Rotation number of a ring orbit by continuous winding about 0,
    accelerated at the denominator times of the running estimate."""
    thetas = _winding_lift(mapping, seed, n_iter)
    lift = circle.LiftedOrbit(theta0=float(thetas[0]), thetas=thetas)
    est = circle.estimate_from_lift(lift, "convergent_accelerated")
    return WindingEstimate(
        value=est.value,
        iterations=n_iter,
        error_bound=est.error_bound,
        center=0.0,
        lift_ok=True,
    )


def _fit_modes_from_orbit(points: np.ndarray, alpha: float, M: int) -> np.ndarray:
    """Fourier modes from an orbit sample via weighted Birkhoff averaging.

    The exponential bump window makes the quasi-Monte-Carlo sums over the
    equidistributed angles k*alpha converge superpolynomially, so even a
    moderate orbit gives a good starting curve."""
    n = len(points)
    x = (np.arange(n) + 1.0) / (n + 1.0)
    w = np.exp(-1.0 / (x * (1.0 - x)))
    w /= w.sum()
    theta = (np.arange(n) * alpha) % 1.0
    ks = np.arange(-M, M + 1)
    modes = np.empty(2 * M + 1, dtype=complex)
    wp = w * points
    for start in range(0, len(ks), 128):
        block = ks[start : start + 128]
        modes[start : start + len(block)] = (
            np.exp(-2j * np.pi * np.outer(block, theta)) @ wp
        )
    return modes


def _gauge_fix(modes: np.ndarray, M: int) -> np.ndarray:
    ks = np.arange(-M, M + 1)
    c1 = modes[M + 1]
    if c1 == 0:
        return modes
    shift = -cmath.phase(c1) / (2.0 * math.pi)
    return modes * np.exp(2j * np.pi * ks * shift)


def _grid_eval(modes: np.ndarray, M: int, L: int, twist: Optional[np.ndarray] = None):
    ks = np.arange(-M, M + 1)
    spec = np.zeros(L, dtype=complex)
    vals = modes if twist is None else modes * twist
    spec[ks % L] += vals
    return np.fft.ifft(spec) * L


def invariant_curve_newton(
    mapping,
    alpha: Union[CFExpansion, float],
    initial,
    M: int = 512,
    tol: float = 1e-9,
    max_steps: int = 50,
) -> FourierCurve:
    """Solve h(theta + alpha) = Q(h(theta)) for the invariant-curve modes.

    ``initial`` may be a FourierCurve, a complex seed whose orbit samples the
    curve, or an orbit array.  The truncation doubles on stagnation up to
    4096 modes.  Raises SmallDivisorError when some |e^{2 pi i k alpha} - 1|
    over |k| <= M is below 1e-12, and NoConvergenceError (with the best
    iterate attached) after ``max_steps`` Newton steps.
    """
    alpha_f = cfrac.to_float(alpha) % 1.0
    if M < 4:
        raise PreconditionError("need M >= 4 modes")
    _check_divisors(alpha_f, M)

    if isinstance(initial, FourierCurve):
        modes = _pad_modes(initial.modes, initial.M, M)
    elif isinstance(initial, (complex, float)):
        modes = _modes_from_seed(mapping, complex(initial), alpha_f, M)
    else:
        pts = np.asarray(initial, dtype=complex)
        if pts.ndim != 1 or len(pts) < 4 * M:
            raise PreconditionError("orbit initializer needs at least 4M points")
        modes = _fit_modes_from_orbit(pts, alpha_f, M)
    modes = _gauge_fix(modes, M)

    best_modes, best_res = modes, math.inf
    stagnant = 0
    step = 0
    while step < max_steps:
        step += 1
        L = 4 * M
        ks = np.arange(-M, M + 1)
        rot = np.exp(2j * np.pi * ks * alpha_f)
        h = _grid_eval(modes, M, L)
        ha = _grid_eval(modes, M, L, twist=rot)
        with np.errstate(all="ignore"):
            r = mapping.eval_array(h) - ha
        res = float(np.max(np.abs(r)))
        if not math.isfinite(res) or res > 1e8:
            raise NoConvergenceError(
                f"curve iteration diverged at step {step}", best=_make_curve(best_modes, M, alpha_f, best_res)
            )
        if res < best_res - 1e-17:
            if res > 0.5 * best_res:
                stagnant += 1
            else:
                stagnant = 0
            best_modes, best_res = modes.copy(), res
        else:
            stagnant += 1
        if res <= tol:
            modes = _gauge_fix(modes, M)
            return _make_curve(modes, M, alpha_f, res)
        if stagnant >= 5:
            if M < MAX_TRUNCATION:
                modes = _pad_modes(modes, M, 2 * M)
                M = 2 * M
                _check_divisors(alpha_f, M)
                stagnant = 0
                continue
            break
        # quasi-Newton update through delta = h' * w
        hp = _grid_eval(modes * (2j * np.pi * ks), M, L)
        hpa = _grid_eval(modes * (2j * np.pi * ks) * rot, M, L)
        if np.any(hpa == 0):
            raise NoConvergenceError(
                "curve derivative vanished on the grid",
                best=_make_curve(best_modes, M, alpha_f, best_res),
            )
        g = r / hpa
        ghat_full = np.fft.fft(g) / L
        ghat = ghat_full[ks % L]
        div = np.exp(2j * np.pi * ks * alpha_f) - 1.0
        div[M] = 1.0
        w = ghat / div
        w[M] = 0.0
        wg = _grid_eval(w, M, L)
        delta = hp * wg
        dmodes = (np.fft.fft(delta) / L)[ks % L]
        modes = modes + dmodes
        modes = _gauge_fix(modes, M)

    raise NoConvergenceError(
        f"no convergence below tol={tol} after {step} steps (best {best_res:.3g})",
        best=_make_curve(_gauge_fix(best_modes, M), M, alpha_f, best_res),
    )


def _check_divisors(alpha_f: float, M: int):
    ks = np.arange(1, M + 1)
    divisors = np.abs(np.exp(2j * np.pi * ks * alpha_f) - 1.0)
    smallest = float(divisors.min())
    if smallest <= SMALL_DIVISOR_FLOOR:
        raise SmallDivisorError(
            f"small divisor |e^(2 pi i k alpha)-1| = {smallest:.3g} at truncation {M}"
        )


def _pad_modes(modes: np.ndarray, M_old: int, M_new: int) -> np.ndarray:
    if M_new == M_old:
        return modes.copy()
    out = np.zeros(2 * M_new + 1, dtype=complex)
    if M_new > M_old:
        out[M_new - M_old : M_new + M_old + 1] = modes
    else:
        out[:] = modes[M_old - M_new : M_old + M_new + 1]
    return out


def _modes_from_seed(mapping, seed: complex, alpha_f: float, M: int) -> np.ndarray:
    n = max(8192, 8 * M)
    settle = 1024
    z = seed
    for _ in range(settle):
        z = mapping(z)
        if not (RING_INNER < abs(z) < RING_OUTER):
            raise OrbitEscapeError("seed orbit left the annulus while settling")
    pts = np.empty(n, dtype=complex)
    for k in range(n):
        pts[k] = z
        z = mapping(z)
        if not (RING_INNER < abs(z) < RING_OUTER):
            raise OrbitEscapeError(f"seed orbit left the annulus at step {settle + k}")
    return _fit_modes_from_orbit(pts, alpha_f, M)


def _make_curve(modes: np.ndarray, M: int, alpha_f: float, res: float) -> FourierCurve:
    return FourierCurve(modes=modes, M=M, alpha=alpha_f, residual=res)


def curve_residual(mapping, curve: FourierCurve, grid_factor: int = 1) -> float:
    """sup of |h(theta+alpha) - Q(h(theta))| on a grid of 4*M*grid_factor points."""
    L = 4 * curve.M * grid_factor
    ks = np.arange(-curve.M, curve.M + 1)
    rot = np.exp(2j * np.pi * ks * curve.alpha)
    h = _grid_eval(curve.modes, curve.M, L)
    ha = _grid_eval(curve.modes, curve.M, L, twist=rot)
    with np.errstate(all="ignore"):
        r = mapping.eval_array(h) - ha
    return float(np.max(np.abs(r)))


def ring_modulus(r_alpha: float, r: float) -> float:
    """Modulus (1/pi) log(r_alpha / r) of the glued ring."""
    if not 0 < r < r_alpha:
        raise PreconditionError("need 0 < r < r_alpha")
    return math.log(r_alpha / r) / math.pi


def mcmullen_area_bound(mod: float, depth: int, initial_area: float) -> float:
    """Area decay initial_area * (1 + 4 pi mod)^(-depth) through nested annuli."""
    if not mod > 0:
        raise PreconditionError("modulus must be positive")
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    return initial_area * (1.0 + 4.0 * math.pi * mod) ** (-depth)


def abc_experiment(
    alpha: CFExpansion,
    r0_ratio,
    N: int,
    n_range: Iterable[int],
    series_len: int = 800,
    ctx: PrecisionContext = QUAD256,
    cache_dir: Optional[str] = None,
) -> ABCResult:
    """Radius trend along the perturbed digit sequences.

    For each n: q_n from the convergents of alpha, A_n = floor(ratio^{q_n}),
    alpha_n = [a0; a1..an, A_n, N, N, ...], and the conformal-radius estimate
    of alpha_n from its linearizer.  The baseline r_hat(alpha) and the target
    r_hat(alpha)/ratio are reported alongside.
    """
    if isinstance(r0_ratio, (int, Fraction)):
        ratio_f = float(Fraction(r0_ratio))
        ratio_exact = Fraction(r0_ratio)
    else:
        ratio_f = float(r0_ratio)
        ratio_exact = r0_ratio
    if ratio_f <= 1.0:
        raise PreconditionError("r_alpha/r_0 ratio must exceed 1")
    ns = sorted(int(n) for n in n_range)
    if not ns or ns[0] < 0:
        raise PreconditionError("n_range must hold nonnegative integers")
    prefix = alpha.prefix(ns[-1]) if ns[-1] > 0 else ()
    if prefix and max(prefix) > 10**6:
        raise PreconditionError("alpha prefix is not remotely of bounded type")

    base_series = siegel.linearizer_coeffs(alpha, series_len, ctx, cache_dir=cache_dir)
    base_est = siegel.conformal_radius_estimate(base_series)
    r0_hat = base_est.value / ratio_f

    table = cfrac.convergents(alpha, max(ns[-1], 1))
    rows = []
    for n in ns:
        q_n = table.q(n) if n >= 1 else 1
        A_n = cfrac.compute_A_n(ratio_exact, q_n)
        alpha_n = cfrac.abc_sequence_number(alpha, n, A_n, N)
        series_n = siegel.linearizer_coeffs(alpha_n, series_len, ctx, cache_dir=cache_dir)
        est_n = siegel.conformal_radius_estimate(series_n)
        rows.append(
            ABCRow(
                n=n,
                A_n=A_n,
                alpha_n=alpha_n,
                r_estimate=est_n.value,
                uncertainty=est_n.uncertainty,
            )
        )
    return ABCResult(
        rows=tuple(rows),
        r_alpha_hat=base_est.value,
        r_alpha_uncertainty=base_est.uncertainty,
        r0_hat=r0_hat,
        ratio=ratio_f,
        N=N,
    )


def abc_csv(result: ABCResult) -> str:
    lines = ["n,A_n,alpha_n_digits,r_est,uncertainty"]
    for row in result.rows:
        lines.append(
            f"{row.n},{row.A_n},{cfrac.format_cf(row.alpha_n)},"
            f"{row.r_estimate!r},{row.uncertainty!r}"
        )
    return "\n".join(lines) + "\n"


def curve_csv(curve: FourierCurve) -> str:
    lines = ["k,re_c,im_c"]
    for k in range(-curve.M, curve.M + 1):
        c = curve.mode(k)
        lines.append(f"{k},{c.real!r},{c.imag!r}")
    return "\n".join(lines) + "\n"


def curve_from_csv(text: str, alpha: float) -> FourierCurve:
    """Rebuild a curve from its dump; the residual is not stored and reads
    back as nan until re-measured against a map."""
    entries = {}
    for line in text.strip().splitlines()[1:]:
        k_s, re_s, im_s = line.split(",")
        entries[int(k_s)] = complex(float(re_s), float(im_s))
    if not entries:
        raise PreconditionError("empty curve dump")
    M = max(abs(k) for k in entries)
    modes = np.zeros(2 * M + 1, dtype=complex)
    for k, c in entries.items():
        modes[k + M] = c
    return FourierCurve(modes=modes, M=M, alpha=float(alpha) % 1.0, residual=math.nan)


def cycle_proximity(mapping, p_max: int, curve: FourierCurve) -> list:
    """Repelling cycles of period <= p_max with distance to the curve and
    which complementary component (by winding test) contains them."""
    if p_max > 4:
        raise PreconditionError("p_max must be <= 4")
    from matplotlib.path import Path

    samples = curve.sample(4096)
    poly = Path(np.column_stack([samples.real, samples.imag]))
    seen = {}
    for p in range(1, p_max + 1):
        for rec in periodic_points(mapping, p):
            rep = rec.points[0]
            key = (round(rep.real, 9), round(rep.imag, 9), rec.period)
            seen.setdefault(key, rec)
    out = []
    for rec in seen.values():
        if not rec.is_repelling:
            continue
        dist = max(
            float(np.min(np.abs(samples - z))) for z in rec.points
        )
        inside = all(
            poly.contains_point((z.real, z.imag)) for z in rec.points
        )
        side = "interior" if inside else "exterior"
        out.append(CycleProximity(cycle=rec, distance=dist, side=side))
    out.sort(key=lambda cp: cp.distance)
    return out


def _sustained_orbit_point(mapping, start: complex, settle: int = 2000) -> Optional[complex]:
    z = complex(start)
    for _ in range(settle):
        z = mapping(z)
        if not (RING_INNER < abs(z) < RING_OUTER) or not cmath.isfinite(z):
            return None
    return z


def refine_u(
    mapping: CubicHermanMap,
    target_alpha: Union[CFExpansion, float],
    search_radius: float = 1e-5,
    budget: int = 300,
    rng_seed: int = 0,
) -> RefineResult:
    """Shrinking pattern search over u minimizing |winding rotation - alpha|.

    Best-effort by design: the objective is measured (noisy at short orbit
    lengths), so orbits lengthen as the pattern contracts.  The search keeps
    the previous orbit point as the seed for neighbouring u values and raises
    SeedLostError if the starting map has no sustained ring orbit at all.
    """
    target = cfrac.to_float(target_alpha) % 1.0
    a = mapping.a
    u0 = mapping.u

    seed = find_ring_seed(mapping, rng_seed=rng_seed)
    z_ring = _sustained_orbit_point(mapping, seed)
    if z_ring is None:
        raise SeedLostError("starting u has no sustained ring orbit")

    def iters_for(step: float) -> int:
        if step > 1e-7:
            return 30_000
        if step > 3e-9:
            return 120_000
        return 400_000

    evaluations = 0

    def objective(u: complex, z_hint: complex, n_iter: int):
        nonlocal evaluations
        try:
            m = CubicHermanMap(a=a, u=u)
        except PreconditionError:
            return None
        z = _sustained_orbit_point(m, z_hint, settle=500)
        if z is None:
            return None
        try:
            est = winding_rotation_number(m, z, n_iter)
        except (OrbitEscapeError, LiftJumpError):
            return None
        evaluations += 1
        return circle.circular_distance(est.value, target), z

    step = search_radius / 2.0
    current_u = u0
    res = objective(current_u, z_ring, iters_for(step))
    if res is None:
        raise SeedLostError("winding measurement failed at the starting u")
    current_j, z_ring = res

    dirs = [cmath.exp(2j * math.pi * k / 8.0) for k in range(8)]
    while evaluations < budget and step > 1e-13:
        n_iter = iters_for(step)
        best = None
        for d in dirs:
            cand = current_u + step * d
            r = objective(cand, z_ring, n_iter)
            if r is None:
                continue
            j, z_new = r
            if best is None or j < best[0]:
                best = (j, cand, z_new)
            if evaluations >= budget:
                break
        if best is not None and best[0] < current_j:
            current_j, current_u, z_ring = best
            # re-measure the incumbent at the finer orbit length occasionally
            if n_iter > 30_000:
                r = objective(current_u, z_ring, n_iter)
                if r is not None:
                    current_j, z_ring = r
        else:
            step *= 0.5
    return RefineResult(u=current_u, rotation_residual=current_j, evaluations=evaluations)
