"""Full-scale acceptance campaign.

Twelve headline checks, one test each, at their stated tolerances and
replication counts. Monte Carlo seeds were fixed once during calibration
and are not tuned per assertion; each passing test prints a one-line
summary with its measured margins (visible under pytest -s or in the
captured output of a failure).

The campaign runs in roughly four minutes on one core; the two sweep
tests at 10^3 replications dominate.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from shotnoise.crossings import (
    count_crossings,
    count_extrema,
    exp_poly_extrema_bound,
    mc_crossing_curve,
    rolle_check,
    total_variation,
)
from shotnoise.kernels import gaussian_kernel
from shotnoise.paths import (
    config_for_interval,
    ensemble_statistics,
    evaluate_path,
    normalize_path,
    small_ball_probability,
)
from shotnoise.ppp import ImpulseSpec, PointConfiguration, sample_ppp, stream
from shotnoise.scalespace import (
    rho_monotonicity_report,
    rho_estimate,
    scaling_check,
    semigroup_check,
)
from shotnoise.spectral import (
    convergence_constants,
    crossing_fourier,
    crossing_fourier_curve,
    gaussian_fourier,
    gaussian_limit,
    invert_crossing_curve,
    stationary_phase_certify,
    total_variation_bound_check,
)

KERN = gaussian_kernel(1.0)
ONE = ImpulseSpec()
M0 = 0.28209479177387814            # integral of g^2, sigma = 1
EXTREMA_ASY = 0.38984840061683805   # (1/pi) sqrt(3/2)


def test_01_extremum_rate_lambda_sweep():
    """Rate vs intensity at sigma=1: cap 2*lam, large-lam plateau, small-lam ratio."""
    lams = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
    est = {}
    for lam in lams:
        e = rho_estimate(lam, 1.0, (0.0, 100.0), 1000, 1101)
        est[lam] = e
        assert e.rho <= 2.0 * lam + 2.0 * e.se, \
            f"rate cap broken at lam={lam}: {e.rho:.5f} > 2*{lam} + 2*{e.se:.5f}"
        assert e.bound_violations == 0
    plateau = est[10.0].rho / EXTREMA_ASY
    assert abs(plateau - 1.0) <= 0.10, f"plateau ratio {plateau:.4f}"
    small = est[0.1].rho / 0.2
    print(f"[01] cap ok at all 7 intensities, plateau ratio {plateau:.4f}, "
          f"small-intensity ratio {small:.4f}")
    # the true rate at lam=0.1, sigma=1 is 0.156 (adjacent-bump merging
    # removes ~20% of the 2*lam count); the 0.85 gate is above the truth
    # and this assertion is expected to fail with the honest value
    assert small >= 0.85, (
        f"small-intensity ratio rho(0.1)/0.2 = {small:.4f} < 0.85; "
        f"measured rho(0.1, 1) = {est[0.1].rho:.5f} +- {est[0.1].se:.5f}, "
        f"confirmed by an independent direct-evaluation oracle (0.1617 +- 0.002); "
        f"bump merging makes the true ratio ~0.78, so the gate is unattainable"
    )


def test_02_extremum_count_monotone_in_smoothing():
    """Per-configuration counts never increase with sigma; rate hits its plateau."""
    rep = rho_monotonicity_report(1.0, [0.25, 0.5, 1.0, 2.0, 4.0], 1000, 2601,
                                  interval=(0.0, 100.0), audit_tracks=2)
    assert rep.per_config_violations == [], \
        f"{len(rep.per_config_violations)} monotonicity violations"
    assert rep.curve_monotone
    assert rep.tracking_diagnostics == [], rep.tracking_diagnostics
    assert rep.passed
    tail = rep.curve.rho[-1] / (EXTREMA_ASY / 4.0)
    assert abs(tail - 1.0) <= 0.15, f"sigma=4 plateau ratio {tail:.4f}"
    print(f"[02] 0 violations in 1000 replications x 4 steps, audits clean, "
          f"sigma=4 plateau ratio {tail:.4f}")


def test_03_spectral_and_monte_carlo_routes_agree():
    """Inverted spectral crossing curve vs direct MC counts, pointwise."""
    for lam, u_max, seed in ((2.0, 8.0, 9301), (10.0, 6.0, 9302)):
        std = math.sqrt(lam * M0)
        alpha = np.linspace(lam - 4.0 * std, lam + 4.0 * std, 25)
        curve = crossing_fourier_curve(lam, KERN, ONE, u_max, 161,
                                       normalized=False, quad_tol=1e-7)
        inv = invert_crossing_curve(curve, alpha)
        mc = mc_crossing_curve(lam, KERN, ONE, alpha, (0.0, 20.0), 400, seed)
        dev = np.abs(inv.values - mc.mean / 20.0)
        budget = 3.0 * (mc.se / 20.0 + inv.error)
        worst = float((dev / budget).max())
        assert np.all(dev <= budget), \
            f"lam={lam}: worst dev/budget {worst:.3f} at alpha={alpha[(dev/budget).argmax()]:.2f}"
        print(f"[03] lam={lam}: 25 levels agree, worst dev/budget {worst:.3f}")


def test_04_normalized_charfn_gaussian_bound_on_grid():
    """Deviation from the limit transform under the (a2 + a3|u|)/sqrt(lam) bound."""
    cc = convergence_constants(KERN)
    gl = gaussian_limit(KERN)
    for lam in (10.0, 100.0):
        grid = np.linspace(-0.98 * cc.valid_u(lam), 0.98 * cc.valid_u(lam), 41)
        worst = 0.0
        for u in grid:
            val, err = crossing_fourier(lam, KERN, ONE, float(u),
                                        normalized=True, quad_tol=1e-8)
            dev = abs(val - gaussian_fourier(gl, float(u)))
            bound = cc.bound(float(u), lam) + err
            assert dev <= bound, f"lam={lam}, u={u:.3f}: {dev:.2e} > {bound:.2e}"
            worst = max(worst, dev / bound)
        print(f"[04] lam={lam}: 41 grid points inside the bound, worst ratio {worst:.4f}")


def test_05_mean_total_variation_bound():
    """E|X'| per unit length vs its sqrt(lam)-scaled limit, bounded error."""
    for lam, seed in ((1.0, 9501), (25.0, 9502)):
        tvs = []
        for r in range(400):
            cfg = config_for_interval(lam, KERN, (0.0, 20.0), ONE, stream(seed, r))
            p = evaluate_path(cfg, KERN, (0.0, 20.0), max_order=1)
            tvs.append(total_variation(p) / 20.0)
        tvs = np.asarray(tvs)
        chk = total_variation_bound_check(
            lam, KERN, float(tvs.mean()),
            float(tvs.std(ddof=1) / math.sqrt(len(tvs))))
        assert chk.passed, f"lam={lam}: lhs {chk.lhs:.5f} rhs {chk.rhs:.5f}"
        print(f"[05] lam={lam}: lhs {chk.lhs:.5f} <= rhs {chk.rhs:.5f} (+3 SE)")


def test_06_normalized_ensemble_moments_near_gaussian():
    """Variance, lagged covariance, and skewness of the normalized ensemble."""
    reps = 10_000
    paths = []
    for r in range(reps):
        cfg = config_for_interval(100.0, KERN, (0.0, 4.0), ONE, stream(2026, r))
        p = evaluate_path(cfg, KERN, (0.0, 4.0), step=0.25, max_order=1)
        paths.append(normalize_path(p))
    st = ensemble_statistics(paths, lags=(0.5, 1.0, 2.0))

    dv = abs(st.variance - M0) / st.variance_se
    assert dv <= 3.0, f"variance {st.variance:.5f} vs {M0:.5f} ({dv:.2f} SE)"
    devs = []
    for tau in (0.5, 1.0, 2.0):
        target = math.exp(-tau * tau / 4.0) / (2.0 * math.sqrt(math.pi))
        c, c_se = st.covariance[tau]
        devs.append(abs(c - target) / c_se)
        assert devs[-1] <= 3.0, f"cov({tau}) {c:.5f} vs {target:.5f} ({devs[-1]:.2f} SE)"
    ds = abs(st.skewness) / st.skewness_se
    assert ds <= 3.0, f"skewness {st.skewness:.4f} ({ds:.2f} SE)"
    print(f"[06] var {dv:.2f} SE, cov {', '.join(f'{d:.2f}' for d in devs)} SE, "
          f"skew {ds:.2f} SE (n=10^4)")


def test_07_intensity_scale_tradeoff_full():
    """c rho(lam, c sigma) = rho(c lam, sigma) at two parameter triples."""
    for lam, sigma, c, seed in ((1.0, 1.0, 2.0, 9701), (2.0, 0.5, 0.5, 9702)):
        chk = scaling_check(lam, sigma, c, (0.0, 60.0), 200, seed)
        d = abs(chk.lhs - chk.rhs) / chk.combined_se
        assert chk.passed, f"({lam},{sigma},{c}): {chk.lhs:.4f} vs {chk.rhs:.4f} ({d:.2f} SE)"
        print(f"[07] ({lam},{sigma},{c}): {chk.lhs:.4f} vs {chk.rhs:.4f} ({d:.2f} SE)")


def test_08_structural_invariants_zero_tolerance():
    """Rolle cap, crossing/extremum alternation, and the 2n-1 extremum bound."""
    levels = np.linspace(-1.0, 5.0, 20)
    for r in range(500):
        cfg = config_for_interval(1.5, KERN, (0.0, 10.0), ONE, stream(9801, r))
        path = evaluate_path(cfg, KERN, (0.0, 10.0), max_order=2)
        assert rolle_check(path, levels).passed, f"rolle violation, replication {r}"
        tal = count_crossings(path, float(np.median(path.x)))
        if tal.tangency_suspect == 0:
            assert all(a != b for a, b in zip(tal.kinds, tal.kinds[1:])), \
                f"crossing alternation broken, replication {r}"
        ext = count_extrema(path)
        if ext.degenerate == 0:
            assert all(a != b for a, b in zip(ext.kinds, ext.kinds[1:])), \
                f"extremum alternation broken, replication {r}"

    for r in range(10_000):
        base = sample_ppp(1.0, (0.0, 3.0), ONE, stream(9802, r))
        cfg = PointConfiguration(window=(-11.0, 14.0), points=base.points,
                                 impulses=base.impulses,
                                 intensity=max(base.count, 1) / 25.0,
                                 impulse_spec=ONE, seed_info=("fixed", 9802, r))
        path = evaluate_path(cfg, KERN, (-4.0, 7.0), max_order=2)
        ext = count_extrema(path, refine=False)
        total = ext.maxima + ext.minima + ext.degenerate
        assert total <= exp_poly_extrema_bound(base.count), \
            f"extremum bound broken: {total} extrema from {base.count} points"
    print("[08] 10^4 path-level Rolle cases, alternation, and 10^4 "
          "finite-window bound cases: 0 violations")


def test_09_oscillatory_integral_certificates():
    """Measured oscillatory-integral magnitudes under the decay bound."""
    rows = stationary_phase_certify(KERN, (-1.0, 2.0),
                                    [10.0, 100.0, 1000.0, 10000.0])
    for row in rows:
        assert row.applicable, f"u={row.target[0]} below the admissible range"
        assert row.passed, f"u={row.target[0]}: {row.magnitude:.4f} > {row.bound:.4f}"
    ring = [(100.0 * math.cos(th), 100.0 * math.sin(th))
            for th in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)]
    rows2 = stationary_phase_certify(KERN, (-1.0, 2.0), ring, mode="2d-joint")
    for row in rows2:
        assert row.applicable and row.passed, \
            f"ring target {row.target}: {row.magnitude:.4f} vs {row.bound:.4f}"
    print(f"[09] 4 frequencies + radius-100 ring certified; "
          f"tightest 1d ratio {max(r.magnitude / r.bound for r in rows):.3f}")


def test_10_small_ball_lower_bound_and_shape():
    """P(|X(0)| <= eps) above its closed-form floor; eps-normalized growth."""
    pts = small_ball_probability(0.2, KERN, ONE, [1e-3, 1e-2, 1e-1], 3000, 9100)
    for p in pts:
        assert p.p_hat >= p.bound - 3.0 * p.se, \
            f"eps={p.eps:g}: {p.p_hat:.4f} below bound {p.bound:.4f}"
    ratios = [p.p_hat / p.eps for p in pts]   # ascending eps
    assert ratios[0] > ratios[1] > ratios[2], f"ratios {ratios}"
    margins = ", ".join(f"{(p.p_hat - p.bound) / p.se:.1f}" for p in pts)
    print(f"[10] bound margins {margins} SE; p/eps strictly increasing "
          f"as eps shrinks ({ratios[2]:.1f} -> {ratios[0]:.1f})")


def test_11_smoothing_composition_identity():
    """Two half-width smoothings equal one combined smoothing on a 0.01 grid."""
    h = 0.01
    grid = np.arange(0.0, 8.0 + h / 2, h)
    cfg = sample_ppp(2.0, (-12.0, 20.0), ONE, stream(9811, 1))
    chk = semigroup_check(cfg, 0.5, 0.5, grid)
    assert chk.deviation <= 1e-4 * chk.peak, \
        f"deviation {chk.deviation:.3e} vs 1e-4 * peak {chk.peak:.3f}"
    print(f"[11] sup deviation {chk.deviation:.2e} = {chk.relative:.2e} of peak")


def test_12_level_integral_matches_total_variation():
    """Integral of the crossing curve over levels vs mean total variation."""
    mc = mc_crossing_curve(2.0, KERN, ONE, np.linspace(-0.5, 7.0, 31),
                           (0.0, 10.0), 400, 9120)
    gap = abs(mc.coarea_gap_mean)
    assert gap <= 2.0 * mc.coarea_gap_se, \
        f"gap {mc.coarea_gap_mean:.5f} vs 2 SE = {2 * mc.coarea_gap_se:.5f}"
    print(f"[12] gap {mc.coarea_gap_mean:.5f} = "
          f"{gap / mc.coarea_gap_se:.2f} SE (400 replications)")
