"""Crossing and extremum counting against analytic single-bump oracles."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import optimize

from shotnoise.crossings import (
    CrossingTally,
    _bisect_batch,
    _tally_levels,
    count_crossings,
    count_extrema,
    exp_poly_extrema_bound,
    kac_estimate,
    mc_crossing_curve,
    rolle_check,
    total_variation,
)
from shotnoise.errors import ParameterError
from shotnoise.kernels import gaussian_kernel
from shotnoise.paths import config_for_interval, evaluate_path
from shotnoise.ppp import ImpulseSpec, PointConfiguration, stream

ONE = ImpulseSpec()
PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


def fixed_config(points, impulses, window):
    points = np.asarray(points, dtype=float)
    return PointConfiguration(
        window=window,
        points=points,
        impulses=np.asarray(impulses, dtype=float),
        intensity=max(len(points), 1) / (window[1] - window[0]),
        impulse_spec=ONE,
        seed_info=("fixed",),
    )


def single_bump_path(center=0.0, half_width=8.0, **kwargs):
    kern = gaussian_kernel(1.0)
    cfg = fixed_config([center], [1.0], (center - half_width - 10.0, center + half_width + 10.0))
    return evaluate_path(cfg, kern, (center - half_width, center + half_width), **kwargs)


def test_single_bump_crossings_at_analytic_locations():
    # g(t) = alpha solves |t| = sqrt(-2 ln(alpha sqrt(2 pi)))
    path = single_bump_path()
    alpha = 0.2
    t_star = math.sqrt(-2.0 * math.log(alpha * math.sqrt(2.0 * math.pi)))
    tally = count_crossings(path, alpha, refine_tol=1e-9)
    assert (tally.up, tally.down, tally.tangency_suspect) == (1, 1, 0)
    assert tally.kinds == ("up", "down")
    assert tally.locations[0] == pytest.approx(-t_star, abs=2e-9)
    assert tally.locations[1] == pytest.approx(t_star, abs=2e-9)
    assert np.all(tally.residuals <= 1e-9)


def test_level_above_peak_never_crossed():
    path = single_bump_path()
    tally = count_crossings(path, PHI0 * 1.01)
    assert tally.total == 0
    # grazing the exact peak flags a suspect rather than inventing crossings
    graze = count_crossings(path, PHI0)
    assert graze.up == graze.down == 0


def test_single_bump_has_one_maximum():
    path = single_bump_path()
    tally = count_extrema(path, refine_tol=1e-9)
    assert (tally.maxima, tally.minima, tally.degenerate) == (1, 0, 0)
    assert tally.locations[0] == pytest.approx(0.0, abs=2e-9)


def test_two_bumps_give_two_maxima_and_a_valley():
    kern = gaussian_kernel(1.0)
    cfg = fixed_config([-1.5, 1.5], [1.0, 1.0], (-20.0, 20.0))
    path = evaluate_path(cfg, kern, (-8.0, 8.0))
    tally = count_extrema(path, refine_tol=1e-9)
    assert (tally.maxima, tally.minima, tally.degenerate) == (2, 1, 0)
    assert tally.kinds == ("max", "min", "max")
    # independent root of X' for the right maximum
    dg = kern.derivs[1]
    root = optimize.brentq(lambda t: dg(t + 1.5) + dg(t - 1.5), 1.0, 2.0, xtol=1e-12)
    assert tally.locations[1] == pytest.approx(0.0, abs=2e-9)
    assert tally.locations[2] == pytest.approx(root, abs=2e-9)


def test_refine_false_counts_match_refined():
    kern = gaussian_kernel(1.0)
    for r in range(25):
        lam = (0.3, 1.0, 4.0)[r % 3]
        cfg = config_for_interval(lam, kern, (0.0, 25.0), ONE, stream(4040, r))
        path = evaluate_path(cfg, kern, (0.0, 25.0), max_order=2)
        level = float(np.median(path.x)) + 0.1
        a = count_crossings(path, level)
        b = count_crossings(path, level, refine=False)
        assert (a.up, a.down, a.tangency_suspect) == (b.up, b.down, b.tangency_suspect)
        assert a.kinds == b.kinds
        ea = count_extrema(path)
        eb = count_extrema(path, refine=False)
        assert (ea.maxima, ea.minima, ea.degenerate) == (eb.maxima, eb.minima, eb.degenerate)
        if ea.total:
            assert np.max(np.abs(ea.locations - eb.locations)) <= path.step


def test_updown_reconciles_with_boundary_signs():
    kern = gaussian_kernel(1.0)
    hits = 0
    for r in range(40):
        cfg = config_for_interval(2.0, kern, (0.0, 20.0), ONE, stream(4141, r))
        path = evaluate_path(cfg, kern, (0.0, 20.0), max_order=2)
        level = float(np.mean(path.x))
        tally = count_crossings(path, level)
        if tally.tangency_suspect:
            continue
        hits += 1
        expected = int(path.x[-1] > level) - int(path.x[0] > level)
        assert tally.up - tally.down == expected
    assert hits >= 35  # suspects are rare at a generic level


def test_crossing_directions_alternate():
    kern = gaussian_kernel(1.0)
    for r in range(20):
        cfg = config_for_interval(1.5, kern, (0.0, 30.0), ONE, stream(4242, r))
        path = evaluate_path(cfg, kern, (0.0, 30.0), max_order=2)
        tally = count_crossings(path, float(np.mean(path.x)))
        kinds = [k for k in tally.kinds if k != "tangency"]
        for a, b in zip(kinds[:-1], kinds[1:]):
            assert a != b
        ext = count_extrema(path)
        seq = [k for k in ext.kinds if k != "degenerate"]
        for a, b in zip(seq[:-1], seq[1:]):
            assert a != b


def test_dead_zone_runs_count_once():
    # bumps 60 apart at sigma 1/4: the middle ~40 units underflow to exact
    # zero, flanked by near-tangent stretches of denormal-scale values
    kern = gaussian_kernel(0.25)
    cfg = fixed_config([0.0, 60.0], [1.0, 1.0], (-10.0, 70.0))
    path = evaluate_path(cfg, kern, (-1.0, 61.0))
    assert np.sum(path.x == 0.0) > 100
    tally = count_crossings(path, 0.0)
    # one suspect for the zero run, one per grazing stretch beside it;
    # never a fabricated up or down crossing
    assert (tally.up, tally.down, tally.tangency_suspect) == (0, 0, 3)
    ext = count_extrema(path)
    # the run of X' == 0 between the bumps counts as the single valley
    assert (ext.maxima, ext.minima, ext.degenerate) == (2, 1, 0)
    assert ext.kinds == ("max", "min", "max")


def test_dead_zone_sign_change_is_a_crossing():
    kern = gaussian_kernel(0.25)
    cfg = fixed_config([0.0, 60.0], [1.0, -1.0], (-10.0, 70.0))
    path = evaluate_path(cfg, kern, (-1.0, 61.0))
    tally = count_crossings(path, 0.0)
    # the exact-zero run is flanked by opposite signs: one down crossing
    assert (tally.up, tally.down, tally.tangency_suspect) == (0, 1, 2)


def test_bisect_batch_handles_exact_midpoint_hit():
    f = lambda x: x ** 3
    root = _bisect_batch(f, np.array([-1.0]), np.array([1.0]), f(np.array([-1.0])), 40)
    assert root[0] == 0.0
    g = lambda x: x - 0.25
    root = _bisect_batch(g, np.array([0.0]), np.array([1.0]), g(np.array([0.0])), 50)
    assert root[0] == pytest.approx(0.25, abs=1e-14)


def test_tally_levels_agrees_with_scalar_counts():
    kern = gaussian_kernel(1.0)
    for r in range(12):
        cfg = config_for_interval(1.0, kern, (0.0, 20.0), ONE, stream(4343, r))
        path = evaluate_path(cfg, kern, (0.0, 20.0), max_order=2)
        levels = np.concatenate(
            [np.linspace(path.x.min() - 0.1, path.x.max() + 0.1, 9),
             [0.0, float(path.x[7])]]  # exact node hit exercised on purpose
        )
        levels = np.sort(levels)
        v_tol = 1e-9 * max(1.0, np.max(np.abs(path.x)))
        d_tol = 1e-9 * max(1.0, np.max(np.abs(path.dx)))
        up, down, suspect = _tally_levels(path.x, path.dx, levels, v_tol, d_tol)
        for j, lv in enumerate(levels):
            t = count_crossings(path, float(lv), refine=False)
            assert (t.up, t.down, t.tangency_suspect) == (up[j], down[j], suspect[j])


def test_kac_functional_converges_to_the_count():
    path = single_bump_path(step=0.001)
    alpha = 0.15
    kac = kac_estimate(path, alpha, delta=0.01)
    assert kac == pytest.approx(2.0, abs=0.05)
    with pytest.raises(ParameterError):
        kac_estimate(path, alpha, delta=0.0)


def test_total_variation_single_bump():
    # int |g'| = 2 g(0)
    path = single_bump_path(step=0.01)
    assert total_variation(path) == pytest.approx(2.0 * PHI0, rel=1e-4)


def test_rolle_bound_on_random_paths():
    kern = gaussian_kernel(1.0)
    for r in range(50):
        lam = (0.5, 2.0)[r % 2]
        cfg = config_for_interval(lam, kern, (0.0, 15.0), ONE, stream(4444, r))
        path = evaluate_path(cfg, kern, (0.0, 15.0), max_order=2)
        lo, hi = float(path.x.min()), float(path.x.max())
        rep = rolle_check(path, np.linspace(lo - 0.2, hi + 0.2, 9))
        assert rep.passed, rep.violations


def test_extrema_capped_by_point_count():
    kern = gaussian_kernel(1.0)
    for r in range(60):
        cfg = config_for_interval(1.0, kern, (0.0, 12.0), ONE, stream(4545, r))
        path = evaluate_path(cfg, kern, (0.0, 12.0), max_order=2)
        cap = exp_poly_extrema_bound(cfg.count)
        assert count_extrema(path, refine=False).total <= cap


def test_exp_poly_extrema_bound_values():
    assert exp_poly_extrema_bound(0) == 0
    assert exp_poly_extrema_bound(1) == 1
    assert exp_poly_extrema_bound(3) == 5
    assert exp_poly_extrema_bound(3, derivative_order=2) == 8
    with pytest.raises(ParameterError):
        exp_poly_extrema_bound(-1)
    with pytest.raises(ParameterError):
        exp_poly_extrema_bound(2, derivative_order=0)


def test_mc_crossing_curve_structure_and_coarea():
    kern = gaussian_kernel(1.0)
    # the level grid must span the realized path range for the level
    # integral to recover the total variation
    levels = np.linspace(-0.5, 7.0, 31)
    curve = mc_crossing_curve(2.0, kern, ONE, levels, (0.0, 40.0), 150, 777)
    assert curve.replications == 150
    assert np.all(curve.se >= 0)
    assert np.allclose(curve.mean, curve.up_mean + curve.down_mean + curve.tangency_rate)
    # level integral of the curve reproduces the total variation (paired)
    assert abs(curve.coarea_gap_mean) <= 2.0 * curve.coarea_gap_se + 1e-6
    assert curve.tv_mean > 0
    with pytest.raises(ParameterError):
        mc_crossing_curve(2.0, kern, ONE, [], (0.0, 10.0), 50, 1)


def test_mc_crossing_curve_conditioning_raises_the_center_counts():
    kern = gaussian_kernel(1.0)
    levels = [0.5]
    base = mc_crossing_curve(0.5, kern, ONE, levels, (-2.0, 2.0), 200, 888)
    cond = mc_crossing_curve(
        0.5, kern, ONE, levels, (-2.0, 2.0), 200, 888, conditioning={"T": 4.0, "k0": 3}
    )
    assert cond.mean[0] > base.mean[0]


def test_crossing_tally_total_property():
    t = CrossingTally(
        level=0.0, interval=(0.0, 1.0), up=2, down=1, tangency_suspect=1,
        locations=np.zeros(4), residuals=np.zeros(4),
        kinds=("up", "down", "up", "tangency"),
    )
    assert t.total == 4
