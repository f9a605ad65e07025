import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from hermankit import cfrac, circle, herman
from hermankit.cfrac import GOLDEN, CFExpansion
from hermankit.errors import (
    NoConvergenceError,
    NoRingFoundError,
    PreconditionError,
)
from hermankit.herman import (
    FourierCurve,
    abc_csv,
    abc_experiment,
    curve_csv,
    curve_from_csv,
    curve_residual,
    cycle_proximity,
    find_ring_seed,
    invariant_curve_newton,
    mcmullen_area_bound,
    refine_u,
    ring_modulus,
    winding_rotation_number,
)
from hermankit.maps import BlaschkeMap, CubicHermanMap, RotationMap
from hermankit.numkit import make_context

from common import SquareMap

GOLDEN_F = (math.sqrt(5) - 1) / 2
FIG2 = CubicHermanMap(a=2 + 0.1j, u=-3.98404183 + 3.28819628j)


@pytest.fixture(scope="module")
def fig2_seed():
    return find_ring_seed(FIG2, budget=1500, orbit_len=6000)


@pytest.fixture(scope="module")
def blaschke_golden():
    t_star = circle.solve_param_for_rotation(
        BlaschkeMap(t=0.0, a=4.0), GOLDEN, tol=1e-9
    )
    return BlaschkeMap(t=t_star, a=4.0)


def test_find_ring_seed_fig2(fig2_seed):
    # the orbit of the seed must genuinely stay in the annulus
    z = fig2_seed
    for _ in range(5000):
        z = FIG2(z)
        assert 1e-6 < abs(z) < 1e6


def test_find_ring_seed_budget_precondition():
    with pytest.raises(PreconditionError):
        find_ring_seed(FIG2, budget=10)


def test_find_ring_seed_generic_u_fails():
    bad = CubicHermanMap(a=FIG2.a, u=2 * FIG2.u)
    with pytest.raises(NoRingFoundError):
        find_ring_seed(bad, budget=1200, orbit_len=3000)


def test_find_ring_seed_blaschke_on_circle(blaschke_golden):
    seed = find_ring_seed(blaschke_golden, budget=1500, orbit_len=4000)
    assert abs(abs(seed) - 1.0) < 0.05


def test_winding_of_synthetic_rotation():
    est = winding_rotation_number(RotationMap(GOLDEN_F), 0.5 + 0j, n_iter=4000)
    assert circle.circular_distance(est.value, GOLDEN_F) < 1.0 / 4000
    assert est.center == 0.0 and est.lift_ok


def test_winding_fig2_near_golden(fig2_seed):
    est = winding_rotation_number(FIG2, fig2_seed, n_iter=60_000)
    assert circle.circular_distance(est.value, GOLDEN_F) < 1e-3


def test_winding_agrees_with_circle_estimator(blaschke_golden):
    est_w = winding_rotation_number(blaschke_golden, 1.0 + 0j, n_iter=40_000)
    est_c = circle.rotation_number(blaschke_golden, 0.0, 40_000)
    tol = max(10 * (est_w.error_bound + est_c.error_bound), 1e-10)
    assert circle.circular_distance(est_w.value, est_c.value) <= tol


def test_curve_newton_rigid_rotation_identity():
    modes = np.zeros(2 * 16 + 1, dtype=complex)
    modes[16 + 1] = 0.7  # the circle of radius 0.7
    start = FourierCurve(modes=modes, M=16, alpha=GOLDEN_F, residual=math.inf)
    curve = invariant_curve_newton(RotationMap(GOLDEN_F), GOLDEN_F, start, M=16, tol=1e-13)
    assert curve.residual < 1e-14
    assert abs(curve.mode(1) - 0.7) < 1e-12
    for k in (-3, 0, 2, 5):
        if k != 1:
            assert abs(curve.mode(k)) < 1e-12


def test_curve_newton_blaschke_image_on_unit_circle(blaschke_golden):
    seed = cmath.exp(2j * math.pi * 0.37)
    curve = invariant_curve_newton(blaschke_golden, GOLDEN, seed, M=64, tol=1e-10)
    pts = curve.sample(512)
    assert np.max(np.abs(np.abs(pts) - 1.0)) < 1e-8
    assert curve.winding_number() == 1


def test_curve_newton_small_divisor_guard():
    with pytest.raises(Exception):
        invariant_curve_newton(RotationMap(0.5), 0.5, 0.7 + 0j, M=8, tol=1e-9)


def test_curve_newton_stall_attaches_best(fig2_seed):
    # the printed 8-digit u has rotation number golden + 3.2e-8, so an
    # exactly-golden curve does not exist and the solve must stall
    with pytest.raises(NoConvergenceError) as info:
        invariant_curve_newton(FIG2, GOLDEN, fig2_seed, M=128, tol=1e-12, max_steps=12)
    best = info.value.best
    assert best is not None
    assert best.residual < 1e-5


def test_curve_newton_fig2_loose_tolerance(fig2_seed):
    curve = invariant_curve_newton(FIG2, GOLDEN, fig2_seed, M=128, tol=1e-6)
    assert curve.residual < 1e-6
    assert curve.winding_number() == 1
    # re-verification on a 4x denser grid with relaxation factor 10
    assert curve_residual(FIG2, curve, grid_factor=4) < 10 * 1e-6


def test_gauge_fixed_modes_agree_from_two_seeds(blaschke_golden):
    f = blaschke_golden
    seed1 = cmath.exp(2j * math.pi * 0.11)
    seed2 = seed1
    for _ in range(1000):
        seed2 = f(seed2)
        seed2 /= abs(seed2)  # stay on the invariant circle: same curve, new phase
    c1 = invariant_curve_newton(f, GOLDEN, seed1, M=64, tol=1e-10)
    c2 = invariant_curve_newton(f, GOLDEN, seed2, M=64, tol=1e-10)
    assert np.max(np.abs(c1.modes - c2.modes)) < 1e-8


def test_curve_csv_round_trip(blaschke_golden):
    curve = invariant_curve_newton(blaschke_golden, GOLDEN, 1.0 + 0j, M=32, tol=1e-9)
    text = curve_csv(curve)
    assert text.splitlines()[0] == "k,re_c,im_c"
    back = curve_from_csv(text, curve.alpha)
    assert back.M == curve.M
    assert np.max(np.abs(back.modes - curve.modes)) < 1e-15


def test_ring_modulus_values():
    r_alpha = 0.39
    assert ring_modulus(r_alpha, r_alpha / math.exp(math.pi)) == pytest.approx(1.0)
    assert ring_modulus(0.39, 0.30) == pytest.approx(math.log(1.3) / math.pi)
    small = ring_modulus(0.39, 0.39 * (1 - 1e-9))
    assert 0 < small < 1e-8


def test_ring_modulus_ordering():
    with pytest.raises(PreconditionError):
        ring_modulus(0.3, 0.4)


def test_mcmullen_bound_values():
    assert mcmullen_area_bound(1.0, 1, 1.0) == pytest.approx(1.0 / (1.0 + 4 * math.pi))
    assert mcmullen_area_bound(1.0, 50, 1.0) < 1e-12
    with pytest.raises(PreconditionError):
        mcmullen_area_bound(0.0, 1, 1.0)


def test_mcmullen_bound_monotone():
    vals_depth = [mcmullen_area_bound(0.5, d, 2.0) for d in (1, 2, 5, 9)]
    assert all(b < a for a, b in zip(vals_depth, vals_depth[1:]))
    vals_mod = [mcmullen_area_bound(m, 3, 2.0) for m in (0.1, 0.5, 1.0, 2.0)]
    assert all(b < a for a, b in zip(vals_mod, vals_mod[1:]))


def test_abc_experiment_small():
    ctx = make_context(128)
    result = abc_experiment(GOLDEN, Fraction(13, 10), 1, (2, 4), series_len=200, ctx=ctx)
    assert result.r0_hat == pytest.approx(result.r_alpha_hat * 10 / 13)
    assert [row.n for row in result.rows] == [2, 4]
    table = cfrac.convergents(GOLDEN, 4)
    alpha_v = cfrac.value(GOLDEN, ctx)
    for row in result.rows:
        q = table.q(row.n)
        v = cfrac.value(row.alpha_n, ctx)
        assert abs(float(v - alpha_v)) < 1.0 / q**2
        assert row.uncertainty >= 0
        assert row.alpha_n.tail == (1,)


def test_abc_experiment_degenerate_digit():
    ctx = make_context(128)
    result = abc_experiment(GOLDEN, Fraction(101, 100), 1, (2,), series_len=128, ctx=ctx)
    assert result.rows[0].A_n == 1  # 1.01^2 < 2
    assert result.rows[0].r_estimate > 0


def test_abc_experiment_rejects_bad_ratio():
    with pytest.raises(PreconditionError):
        abc_experiment(GOLDEN, Fraction(9, 10), 1, (2,), series_len=128)


def test_abc_csv_format():
    ctx = make_context(128)
    result = abc_experiment(GOLDEN, Fraction(13, 10), 1, (2,), series_len=128, ctx=ctx)
    lines = abc_csv(result).splitlines()
    assert lines[0] == "n,A_n,alpha_n_digits,r_est,uncertainty"
    assert lines[1].startswith("2,1,0;1,1,1,[1],")


def test_cycle_proximity_square_map_circle():
    modes = np.zeros(2 * 8 + 1, dtype=complex)
    modes[8 + 1] = 1.0
    circle_curve = FourierCurve(modes=modes, M=8, alpha=0.5, residual=0.0)
    prox = cycle_proximity(SquareMap(), 2, circle_curve)
    fixed = [cp for cp in prox if cp.cycle.period == 1]
    assert fixed, "the repelling fixed point z=1 must be reported"
    assert fixed[0].distance < 1e-6
    assert fixed[0].cycle.multiplier == pytest.approx(2.0)


def test_cycle_proximity_p_max_guard():
    modes = np.zeros(3, dtype=complex)
    modes[2] = 1.0
    curve = FourierCurve(modes=modes, M=1, alpha=0.5, residual=0.0)
    with pytest.raises(PreconditionError):
        cycle_proximity(SquareMap(), 5, curve)


def test_cycle_proximity_fig2_both_sides(fig2_seed):
    curve = invariant_curve_newton(FIG2, GOLDEN, fig2_seed, M=128, tol=1e-6)
    prox = cycle_proximity(FIG2, 2, curve)
    sides = {cp.side for cp in prox}
    assert sides == {"interior", "exterior"}


def test_refine_u_improves_perturbed_start(fig2_seed):
    perturbed = CubicHermanMap(a=FIG2.a, u=FIG2.u + 2e-4)
    seed = find_ring_seed(perturbed, budget=1200, orbit_len=4000)
    before = winding_rotation_number(perturbed, seed, 30_000)
    start_res = circle.circular_distance(before.value, GOLDEN_F)
    result = refine_u(perturbed, GOLDEN, search_radius=5e-4, budget=40)
    assert result.rotation_residual <= start_res
    assert result.evaluations <= 41


def test_refine_u_absurd_target_budget_exhaustion():
    result = refine_u(FIG2, 0.01, search_radius=1e-5, budget=10)
    assert result.rotation_residual > 0.05
    assert result.evaluations <= 11
