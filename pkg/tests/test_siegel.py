import math
import random

import mpmath
import numpy as np
import pytest
from mpmath import mp

from hermankit import cfrac, siegel
from hermankit.cfrac import GOLDEN, CFExpansion
from hermankit.errors import (
    PreconditionError,
    SmallDivisorError,
    TrustRegionError,
)
from hermankit.numkit import make_context
from hermankit.siegel import (
    classify_orbit_LM,
    conformal_radius_estimate,
    invert_linearizer,
    linearizer_coeffs,
    subdisk_boundary,
)

CTX128 = make_context(128)
CTX256 = make_context(256)


@pytest.fixture(scope="module")
def golden_series():
    return linearizer_coeffs(GOLDEN, 400, CTX256)


def test_b2_b3_closed_forms(golden_series):
    s = golden_series
    with mpmath.workprec(256):
        lam = s.lam
        b2 = 1 / (lam**2 - lam)
        b3 = 2 * b2 / (lam**3 - lam)
        eps = mp.mpf(2) ** -240
        assert abs(s.b(2) - b2) < eps * abs(b2)
        assert abs(s.b(3) - b3) < eps * abs(b3)


def test_recursion_invariant_sampled(golden_series):
    s = golden_series
    with mpmath.workprec(256):
        lam = s.lam
        for m in (5, 17, 97, 200):
            lhs = s.b(m) * (lam**m - lam)
            rhs = mp.mpc(0)
            for i in range(1, m):
                rhs += s.b(i) * s.b(m - i)
            assert abs(lhs - rhs) < mp.mpf(2) ** -200 * max(abs(rhs), 1)


def test_conjugate_rotation_gives_conjugate_coefficients(golden_series):
    ctx = CTX256
    with ctx.workprec():
        # mpmath rounds even unary minus to the ambient precision
        v_neg = -cfrac.value(GOLDEN, ctx)
    s_neg = linearizer_coeffs(v_neg, 400, ctx)
    with mpmath.workprec(256):
        for m in (2, 3, 10, 100, 400):
            assert s_neg.b(m) == mp.conj(golden_series.b(m))
    assert s_neg.radius_estimate == golden_series.radius_estimate


def test_functional_equation_residual_medium():
    ctx = CTX128
    s = linearizer_coeffs(GOLDEN, 256, ctx)
    with mpmath.workprec(128):
        lam = s.lam
        r = 0.5 * s.radius_estimate
        worst = mp.mpf(0)
        for j in range(64):
            zeta = mp.mpc(r) * mp.expjpi(2 * mp.mpf(j) / 64)
            lhs = s.eval_mp(lam * zeta)
            rhs = lam * s.eval_mp(zeta) + s.eval_mp(zeta) ** 2
            worst = max(worst, abs(lhs - rhs))
        assert worst < 1e-8


def test_radius_estimates_agree_at_two_truncations():
    s200 = linearizer_coeffs(GOLDEN, 200, CTX128)
    s400 = linearizer_coeffs(GOLDEN, 400, CTX128)
    e200 = conformal_radius_estimate(s200)
    e400 = conformal_radius_estimate(s400)
    assert abs(e200.value - e400.value) / e400.value < 0.01
    assert not e400.diverging
    assert e400.uncertainty < 0.01


def test_rational_rotation_rejected():
    with pytest.raises(PreconditionError):
        linearizer_coeffs(CFExpansion(0, (3,), (), True), 100, CTX128)


def test_small_divisor_detected():
    # alpha = 0.5 makes lam^3 - lam vanish exactly
    with pytest.raises(SmallDivisorError):
        linearizer_coeffs(0.5, 16, CTX128)


def test_radius_needs_enough_terms():
    s = linearizer_coeffs(GOLDEN, 32, CTX128)
    with pytest.raises(PreconditionError):
        conformal_radius_estimate(s)


def test_divergence_flag_on_pathological_prefix():
    # q_5 = 236 sits in the top quarter of the window, and the following
    # astronomical digit makes the log-growth bend sharply upward there
    cf = CFExpansion(0, (2, 2, 3, 4, 3, 10**40), (1,))
    s = linearizer_coeffs(cf, 256, CTX256)
    est = conformal_radius_estimate(s)
    assert est.diverging


def test_divergence_flag_quiet_on_golden(golden_series):
    assert not conformal_radius_estimate(golden_series).diverging


def test_invert_at_origin(golden_series):
    rho = 0.5 * golden_series.radius_estimate
    assert invert_linearizer(golden_series, 0.0, rho) == 0.0


def test_invert_round_trip(golden_series):
    s = golden_series
    rho = 0.5 * s.radius_estimate
    zeta0 = rho / 2
    z = complex(s.eval_mp(zeta0))
    zeta = invert_linearizer(s, z, rho)
    assert zeta is not None
    assert abs(zeta - zeta0) < 1e-10


def test_invert_far_point_absent(golden_series):
    rho = 0.5 * golden_series.radius_estimate
    assert invert_linearizer(golden_series, 10.0 + 0j, rho) is None


def test_trust_region_violation(golden_series):
    with pytest.raises(TrustRegionError):
        invert_linearizer(golden_series, 0.1, 0.95 * golden_series.radius_estimate)


def test_classify_center_enters_immediately(golden_series):
    rho = 0.5 * golden_series.radius_estimate
    fate = classify_orbit_LM(GOLDEN, 0.0, rho, 50, golden_series)
    assert fate.status == "entered_subdisk" and fate.entry_step == 0


def test_classify_far_point_escapes(golden_series):
    rho = 0.5 * golden_series.radius_estimate
    fate = classify_orbit_LM(GOLDEN, 10.0 + 0j, rho, 50, golden_series)
    assert fate.status == "escaped" and fate.steps == 0


def test_classify_annulus_point_undecided(golden_series):
    s = golden_series
    rho = 0.25 * s.radius_estimate
    z = complex(s.eval_mp(0.7 * s.radius_estimate * 0.99))
    fate = classify_orbit_LM(GOLDEN, z, rho, 60, s)
    assert fate.status == "undecided"


def test_classify_monotone_in_k_max(golden_series):
    rng = random.Random(2)
    rho = 0.5 * golden_series.radius_estimate
    for _ in range(12):
        z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        prev = None
        for k_max in (5, 20, 60):
            fate = classify_orbit_LM(GOLDEN, z, rho, k_max, golden_series)
            if prev is not None and prev.status != "undecided":
                assert fate.status == prev.status
                assert fate.entry_step == prev.entry_step or fate.status == "escaped"
            prev = fate


def test_classify_partition_and_membership(golden_series):
    rng = random.Random(8)
    s = golden_series
    rho = 0.5 * s.radius_estimate
    mapping = s.map_double()
    pts = [complex(rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(40)]
    counts = {"escaped": 0, "entered_subdisk": 0, "undecided": 0}
    for z0 in pts:
        fate = classify_orbit_LM(GOLDEN, z0, rho, 80, s)
        counts[fate.status] += 1
        if fate.status == "entered_subdisk":
            z = z0
            for _ in range(fate.entry_step):
                z = mapping(z)
            zeta = invert_linearizer(s, z, rho)
            assert zeta is not None
            # independent forward check through the series
            assert abs(complex(s.eval_mp(zeta)) - z) < 1e-9
    assert sum(counts.values()) == len(pts)


def test_subdisk_boundary_closed_curve(golden_series):
    rho = 0.5 * golden_series.radius_estimate
    gamma = subdisk_boundary(golden_series, rho, samples=256)
    assert len(gamma) == 256
    # curve winds once around the origin
    dphi = np.angle(np.roll(gamma, -1) / gamma)
    assert round(float(np.sum(dphi)) / (2 * math.pi)) == 1


def test_coefficient_cache_round_trip(tmp_path, golden_series):
    cache = str(tmp_path)
    s1 = linearizer_coeffs(GOLDEN, 64, CTX128, cache_dir=cache)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    s2 = linearizer_coeffs(GOLDEN, 64, CTX128, cache_dir=cache)
    assert s1.coefficients == s2.coefficients


def test_coefficient_cache_corruption_recomputes(tmp_path):
    cache = str(tmp_path)
    s1 = linearizer_coeffs(GOLDEN, 64, CTX128, cache_dir=cache)
    path = next(tmp_path.iterdir())
    path.write_bytes(path.read_bytes()[: len(path.read_bytes()) // 3])
    s2 = linearizer_coeffs(GOLDEN, 64, CTX128, cache_dir=cache)
    assert s1.coefficients == s2.coefficients


def test_fate_grid_csv(golden_series):
    rho = 0.5 * golden_series.radius_estimate
    pts = [0.0, 10.0 + 0j]
    fates = [classify_orbit_LM(GOLDEN, z, rho, 10, golden_series) for z in pts]
    csv = siegel.fate_grid_csv(pts, fates)
    lines = csv.strip().splitlines()
    assert lines[0] == "re,im,status,steps,entry_step"
    assert "entered_subdisk" in lines[1] and "escaped" in lines[2]
