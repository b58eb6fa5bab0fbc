"""Scale-space tracking, the extremum-rate curve, and the smoothing algebra."""
from __future__ import annotations

import math

import numpy as np
import pytest

from shotnoise.crossings import count_extrema
from shotnoise.errors import ParameterError
from shotnoise.kernels import gaussian_kernel
from shotnoise.paths import config_for_interval, evaluate_path
from shotnoise.ppp import ImpulseSpec, PointConfiguration, stream
from shotnoise.scalespace import (
    extrema_rate_bound,
    rho_estimate,
    rho_monotonicity_report,
    scaling_check,
    semigroup_check,
    track_extrema,
)

ONE = ImpulseSpec()


def two_spike_config(window=(-16.0, 16.0)):
    return PointConfiguration(
        window=window,
        points=np.array([-0.5, 0.5]),
        impulses=np.array([1.0, 1.0]),
        intensity=2.0 / (window[1] - window[0]),
        impulse_spec=ONE,
        seed_info=("fixed",),
    )


def test_symmetric_merge_is_tracked_as_a_pair_birth():
    # two unit spikes at +-1/2: above sigma = 1/2 the center is the only
    # maximum, below it the center flips to a minimum and a symmetric pair
    # of maxima descends onto the spike positions
    tracks = track_extrema(two_spike_config(), (0.1, 1.2), (-4.0, 4.0),
                           checkpoints=[0.8, 0.3])
    assert len(tracks) == 3
    center, left, right = tracks
    assert center.birth_event == "initial"
    assert center.birth_sigma == 1.2
    assert center.kind == "min"
    assert abs(center.last_t) < 1e-5

    for tr, spike in ((left, -0.5), (right, 0.5)):
        assert tr.birth_event == "pair"
        assert tr.kind == "max"
        assert tr.birth_sigma == pytest.approx(0.5, abs=5e-4)
        assert tr.last_t == pytest.approx(spike, abs=1e-4)
        assert tr.death == "reached sigma_min"
    assert left.partner == right.track_id
    assert right.partner == left.track_id

    # requested checkpoint scales appear verbatim in the sample columns
    center_sigmas = [s for s, _ in center.samples]
    assert any(s == 0.8 for s in center_sigmas)
    assert any(s == 0.3 for s in center_sigmas)
    for tr in (left, right):
        ss = [s for s, _ in tr.samples]
        assert any(s == 0.3 for s in ss)
        assert not any(s == 0.8 for s in ss)  # not yet born


def test_track_samples_descend_in_sigma():
    tracks = track_extrema(two_spike_config(), (0.1, 1.2), (-4.0, 4.0))
    for tr in tracks:
        sig = np.array([s for s, _ in tr.samples])
        assert np.all(np.diff(sig) < 0)
        assert tr.drift_max >= 0.0
        assert tr.birth_event in ("initial", "pair", "entered")


def test_surviving_tracks_match_a_direct_count():
    kern_max = gaussian_kernel(2.0)
    cfg = config_for_interval(1.5, kern_max, (0.0, 20.0), ONE, stream(314, 0),
                              max_order=2)
    tracks = track_extrema(cfg, (0.5, 2.0), (0.0, 20.0))
    alive = sorted((t for t in tracks if t.death == "reached sigma_min"),
                   key=lambda t: t.last_t)

    path = evaluate_path(cfg, gaussian_kernel(0.5), (0.0, 20.0), max_order=2)
    direct = count_extrema(path, refine_tol=1e-9)
    assert direct.degenerate == 0
    assert len(alive) == direct.maxima + direct.minima == 15
    assert sum(1 for t in alive if t.kind == "max") == direct.maxima
    assert sum(1 for t in alive if t.kind == "min") == direct.minima
    got = np.array([t.last_t for t in alive])
    assert np.max(np.abs(got - direct.locations)) < 1e-6


def test_semigroup_composition_of_smoothing():
    check = semigroup_check(two_spike_config(), 0.6, 0.8,
                            np.linspace(-3.0, 3.0, 601))
    assert check.relative < 1e-12
    assert check.peak > 0.5


def test_intensity_scale_tradeoff():
    check = scaling_check(1.0, 0.8, 2.0, (0.0, 60.0), 40, 2718)
    assert check.passed
    assert abs(check.lhs - check.rhs) <= 3.0 * check.combined_se
    with pytest.raises(ParameterError):
        scaling_check(1.0, 0.8, -1.0, (0.0, 60.0), 10, 1)


def test_rho_estimate_reproducible_with_rate_bound():
    est = rho_estimate(1.0, 1.0, (0.0, 80.0), 30, 515)
    assert est.rho == pytest.approx(0.4041666666666667, rel=1e-12)
    assert est.length == 80.0
    assert est.replications == 30
    assert est.bound == extrema_rate_bound(1.0, 1.0)
    assert est.bound_violations == 0
    assert 0 < est.se < 0.05


def test_rho_estimate_guards():
    with pytest.raises(ParameterError):
        rho_estimate(0.0, 1.0, (0.0, 10.0), 5, 1)
    with pytest.raises(ParameterError):
        rho_estimate(1.0, -2.0, (0.0, 10.0), 5, 1)
    with pytest.raises(ParameterError):
        rho_estimate(1.0, 1.0, (0.0, 10.0), 1, 1)


def test_extrema_rate_bound_closed_form():
    assert extrema_rate_bound(1.0, 1.0) == pytest.approx(13.0 * math.e, rel=1e-12)
    lam, sigma = 0.5, 2.0
    expected = (3.0 * lam * (2.0 + 2.0 * sigma) + 1.0) * math.exp(lam)
    assert extrema_rate_bound(lam, sigma) == pytest.approx(expected, rel=1e-12)


def test_monotonicity_report_small_campaign():
    rep = rho_monotonicity_report(1.0, [0.8, 1.2, 1.6], 12, 5150,
                                  interval=(0.0, 60.0), audit_tracks=1)
    assert rep.passed
    assert rep.curve_monotone
    assert rep.per_config_violations == []
    assert rep.tracking_diagnostics == []
    assert rep.counts.shape == (12, 3)
    # common random numbers make every row individually non-increasing
    assert np.all(np.diff(rep.counts, axis=1) <= 0)
    assert np.all(np.diff(rep.curve.rho) < 0)
    assert rep.curve.axis_name == "sigma"


def test_monotonicity_report_guards():
    with pytest.raises(ParameterError):
        rho_monotonicity_report(1.0, [1.5, 1.0], 5, 1)
    with pytest.raises(ParameterError):
        rho_monotonicity_report(1.0, [1.0], 5, 1)
