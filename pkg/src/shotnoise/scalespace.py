"""Gaussian scale-space structure of shot noise paths.

Everything here is specific to the Gaussian kernel family: the extremum
rate rho(lam, sigma), the scaling law c rho(lam, c sigma) = rho(c lam, sigma),
the smoothing semigroup, and continuation of extremum locations in sigma.
The kernel satisfies the heat equation d/d sigma = sigma d^2/dt^2, so a
simple zero of X' drifts along dt/dsigma = -sigma X'''/X'' and extremum
counts never increase under coarsening; new extrema appear only while
stepping sigma downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._pool import pmap
from .crossings import count_extrema
from .errors import ParameterError, TrackingError
from .kernels import gaussian_kernel, truncation_radius
from .paths import config_for_interval, evaluate_path
from .ppp import ImpulseSpec, PointConfiguration, Stream, stream

_DEFAULT_IMPULSES = ImpulseSpec("deterministic-one", ())


@dataclass(frozen=True)
class RhoEstimate:
    rho: float
    se: float
    replications: int
    length: float
    bound: float
    bound_violations: int


def extrema_rate_bound(lam: float, sigma: float) -> float:
    """Coarse a priori bound on the extremum rate per unit length."""
    return (3.0 * lam * (2.0 + 2.0 * sigma) + 1.0) * math.exp(lam)


def rho_estimate(
    lam: float,
    sigma: float,
    interval: tuple[float, float],
    replications: int,
    master_seed: int,
    impulses: Optional[ImpulseSpec] = None,
    threads: int = 1,
) -> RhoEstimate:
    """Monte Carlo extremum rate: mean count_extrema total per unit length."""
    if not (lam > 0 and sigma > 0):
        raise ParameterError(f"lam and sigma must be positive, got {lam}, {sigma}")
    if replications < 2:
        raise ParameterError("need at least 2 replications for a standard error")
    spec = impulses if impulses is not None else _DEFAULT_IMPULSES
    kern = gaussian_kernel(sigma)
    length = interval[1] - interval[0]

    def one(r: int) -> int:
        cfg = config_for_interval(lam, kern, interval, spec, stream(master_seed, r))
        path = evaluate_path(cfg, kern, interval, max_order=2)
        return count_extrema(path, refine=False).total

    counts = np.array(pmap(one, replications, threads), dtype=float)
    bound = extrema_rate_bound(lam, sigma)
    return RhoEstimate(
        rho=float(counts.mean() / length),
        se=float(counts.std(ddof=1) / math.sqrt(replications) / length),
        replications=replications,
        length=length,
        bound=bound,
        bound_violations=int(np.sum(counts / length > bound)),
    )


@dataclass(frozen=True)
class RhoCurve:
    axis: np.ndarray
    rho: np.ndarray
    se: np.ndarray
    replications: int
    length: float
    axis_name: str = "sigma"


@dataclass(frozen=True)
class ScalingCheck:
    lhs: float      # c * rho(lam, c sigma)
    rhs: float      # rho(c lam, sigma)
    combined_se: float
    passed: bool


def scaling_check(
    lam: float,
    sigma: float,
    c: float,
    interval: tuple[float, float],
    replications: int,
    master_seed: int,
    impulses: Optional[ImpulseSpec] = None,
    threads: int = 1,
) -> ScalingCheck:
    """Both sides of c rho(lam, c sigma) = rho(c lam, sigma), independent seeds."""
    if not c > 0:
        raise ParameterError(f"c must be positive, got {c}")
    left = rho_estimate(lam, c * sigma, interval, replications, master_seed,
                        impulses=impulses, threads=threads)
    right = rho_estimate(c * lam, sigma, interval, replications, master_seed + 1,
                         impulses=impulses, threads=threads)
    lhs = c * left.rho
    rhs = right.rho
    combined = math.hypot(c * left.se, right.se)
    return ScalingCheck(lhs=lhs, rhs=rhs, combined_se=combined,
                        passed=abs(lhs - rhs) <= 3.0 * combined)


@dataclass(frozen=True)
class SemigroupCheck:
    deviation: float
    peak: float
    relative: float
    step: float
    reach: float


def semigroup_check(
    config: PointConfiguration,
    sigma1: float,
    sigma2: float,
    grid: np.ndarray,
) -> SemigroupCheck:
    """Compare direct evaluation at width sqrt(s1^2 + s2^2) with smoothing.

    The right side convolves the sigma1 path with a sampled Gaussian of
    width sigma2 on the same uniform grid, extended left and right by the
    convolution reach.  The window of the configuration must cover the
    extension, otherwise a window error propagates.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ParameterError("grid must be a 1-d array with at least two nodes")
    h = float(grid[1] - grid[0])
    if not np.allclose(np.diff(grid), h, rtol=0, atol=1e-9 * max(h, 1.0)):
        raise ParameterError("grid must be uniform")

    k2 = gaussian_kernel(sigma2)
    reach = truncation_radius(k2, 0, 1.0, 1e-14)
    m = int(math.ceil(reach / h))
    pad = m * h

    k1 = gaussian_kernel(sigma1)
    wide = evaluate_path(config, k1, (grid[0] - pad, grid[-1] + pad), step=h, max_order=1)
    direct = evaluate_path(
        config, gaussian_kernel(math.hypot(sigma1, sigma2)),
        (float(grid[0]), float(grid[-1])), step=h, max_order=1,
    )
    weights = k2.derivs[0](h * np.arange(-m, m + 1))
    smoothed = np.convolve(wide.x, weights, mode="valid") * h

    dev = float(np.max(np.abs(smoothed - direct.x)))
    peak = float(np.max(np.abs(direct.x)))
    return SemigroupCheck(
        deviation=dev,
        peak=peak,
        relative=dev / peak if peak > 0 else 0.0,
        step=h,
        reach=pad,
    )


@dataclass
class ExtremaTrack:
    """One extremum followed downward in sigma; samples are (sigma, t).

    kind is the latest classification: it flips (max to min) exactly when
    a symmetric merge point passes a same-kind pair birth around the track.
    """

    track_id: int
    kind: str
    samples: list = field(default_factory=list)
    birth_sigma: float = 0.0
    birth_event: str = "initial"       # initial | pair | entered
    death: str = "reached sigma_min"
    partner: Optional[int] = None
    drift_max: float = 0.0

    @property
    def last_t(self) -> float:
        return self.samples[-1][1]


class _Tracker:
    """Continuation state for one configuration."""

    def __init__(self, config, interval, refine_tol):
        self.config = config
        self.interval = interval
        self.refine_tol = refine_tol
        self.tracks: list[ExtremaTrack] = []
        self.live: list[int] = []
        self.next_id = 0

    def path_at(self, sigma: float, span=None, step_div: float = 20.0):
        span = self.interval if span is None else span
        kern = gaussian_kernel(sigma)
        return evaluate_path(self.config, kern, span, step=sigma / step_div, max_order=2)

    def spawn(self, sigma, t, kind, event, partner=None, birth=None):
        tr = ExtremaTrack(
            track_id=self.next_id, kind=kind, samples=[(sigma, t)],
            birth_sigma=sigma if birth is None else birth, birth_event=event,
            partner=partner,
        )
        self.next_id += 1
        self.tracks.append(tr)
        self.live.append(tr.track_id)
        return tr

    def window_zero_count(self, sigma, lo, hi) -> int:
        a, b = self.interval
        lo, hi = max(a, lo), min(b, hi)
        if hi - lo < 4 * self.refine_tol:
            return 0
        step = min(sigma / 40.0, (hi - lo) / 16.0)
        path = self.path_at(sigma, span=(lo, hi), step_div=sigma / step)
        return count_extrema(path, refine=False).total

    def refine_pair_sigma(self, s_absent, s_present, t1, t2) -> Optional[float]:
        gap = max(t2 - t1, 10 * self.refine_tol)
        lo, hi = t1 - 2 * gap, t2 + 2 * gap
        base = self.window_zero_count(s_absent, lo, hi)
        if self.window_zero_count(s_present, lo, hi) < base + 2:
            return None
        s_hi, s_lo = s_absent, s_present
        for _ in range(8):
            mid = 0.5 * (s_hi + s_lo)
            if self.window_zero_count(mid, lo, hi) >= base + 2:
                s_lo = mid
            else:
                s_hi = mid
        return 0.5 * (s_hi + s_lo)


def _predict(path_old, sigma_old, sigma_new, t):
    d2 = float(path_old.evaluator(t, 2)[0])
    d3 = float(path_old.evaluator(t, 3)[0])
    if abs(d2) < 1e-300:
        return t, 0.25 * sigma_old
    dt = sigma_old * (d3 / d2) * (sigma_old - sigma_new)
    cap = 0.25 * sigma_old
    dt = max(-cap, min(cap, dt))
    return t + dt, abs(dt)


def _advance(tk: _Tracker, sigma_old, path_old, sigma_new, depth=0):
    """One continuation step downward; recursive bisection on trouble.

    The whole level is planned before any state changes, so a failed plan
    can simply fall back to two half steps.
    """
    a, b = tk.interval
    tol_floor = max(10 * tk.refine_tol, 1e-6 * sigma_new)
    path_new = tk.path_at(sigma_new)
    tally = count_extrema(path_new)

    troubled = False
    matches: dict[int, int] = {}
    stale: list[int] = []
    births = []
    entries = []

    preds = {}
    for tid in tk.live:
        pred, dt = _predict(path_old, sigma_old, sigma_new, tk.tracks[tid].last_t)
        preds[tid] = (pred, 3.0 * dt + tol_floor)
    cands = []
    for tid, (pred, trust) in preds.items():
        kind = tk.tracks[tid].kind
        for j, loc in enumerate(tally.locations):
            # a degenerate flag is a flat patch, not a kind change:
            # it matches any track and the track keeps its own kind
            agree = tally.kinds[j] in (kind, "degenerate") or kind == "degenerate"
            if agree and abs(loc - pred) <= trust:
                cands.append((abs(loc - pred), tid, j))
    cands.sort()
    used_j = set()
    for _, tid, j in cands:
        if tid in matches or j in used_j:
            continue
        matches[tid] = j
        used_j.add(j)

    # A symmetric merge is a composite event: the surviving zero flips
    # kind in place while a same-kind pair appears around it.  Resolve
    # the triple here so equal-impulse configurations do not bisect to
    # exhaustion at the merge scale.
    opposite = {"max": "min", "min": "max"}
    sorted_j = sorted(range(len(tally.locations)), key=lambda j: tally.locations[j])
    for tid in tk.live:
        if tid in matches:
            continue
        pred, trust = preds[tid]
        kind = tk.tracks[tid].kind
        want = opposite.get(kind)
        for pos in range(1, len(sorted_j) - 1):
            j = sorted_j[pos]
            if j in used_j or tally.kinds[j] != want:
                continue
            if abs(float(tally.locations[j]) - pred) > trust:
                continue
            jl, jr = sorted_j[pos - 1], sorted_j[pos + 1]
            if jl in used_j or jr in used_j:
                continue
            if tally.kinds[jl] != kind or tally.kinds[jr] != kind:
                continue
            locc = float(tally.locations[j])
            locl = float(tally.locations[jl])
            locr = float(tally.locations[jr])
            w = max(sigma_new, 20 * tol_floor)
            if locc - locl > w or locr - locc > w:
                continue
            born = tk.refine_pair_sigma(sigma_old, sigma_new, locl, locr)
            if born is None:
                continue
            matches[tid] = j
            births.append((locl, kind, locr, kind, born))
            used_j.update((j, jl, jr))
            break

    for tid in tk.live:
        if tid in matches:
            continue
        pred, margin = preds[tid]
        if pred <= a + margin or pred >= b - margin:
            stale.append(tid)      # drifted through the boundary
        else:
            troubled = True        # lost an interior track

    new_j = sorted((j for j in range(len(tally.locations)) if j not in used_j),
                   key=lambda j: tally.locations[j])
    i = 0
    while i < len(new_j) and not troubled:
        j = new_j[i]
        loc, kind = float(tally.locations[j]), tally.kinds[j]
        if i + 1 < len(new_j):
            j2 = new_j[i + 1]
            loc2, kind2 = float(tally.locations[j2]), tally.kinds[j2]
            if {kind, kind2} == {"max", "min"} and loc2 - loc <= max(sigma_new, 20 * tol_floor):
                born = tk.refine_pair_sigma(sigma_old, sigma_new, loc, loc2)
                if born is not None:
                    births.append((loc, kind, loc2, kind2, born))
                    i += 2
                    continue
        if loc <= a + 0.5 * sigma_new or loc >= b - 0.5 * sigma_new:
            entries.append((loc, kind))
            i += 1
            continue
        troubled = True            # interior zero with no explanation

    if troubled:
        if depth >= 8:
            raise TrackingError(
                f"continuation failed between sigma {sigma_old:g} and {sigma_new:g}"
            )
        mid = 0.5 * (sigma_old + sigma_new)
        path_mid = _advance(tk, sigma_old, path_old, mid, depth + 1)
        return _advance(tk, mid, path_mid, sigma_new, depth + 1)

    for tid in stale:
        tk.tracks[tid].death = f"exited interval at sigma={sigma_new:g}"
        tk.live.remove(tid)
    for tid, j in matches.items():
        tr = tk.tracks[tid]
        step_drift = abs(tally.locations[j] - tr.last_t) / max(sigma_old - sigma_new, 1e-300)
        tr.drift_max = max(tr.drift_max, step_drift)
        if tally.kinds[j] != "degenerate":
            tr.kind = tally.kinds[j]      # flips only across a symmetric merge
        tr.samples.append((sigma_new, float(tally.locations[j])))
    for loc, kind, loc2, kind2, born in births:
        t1 = tk.spawn(sigma_new, loc, kind, "pair", birth=born)
        t2 = tk.spawn(sigma_new, loc2, kind2, "pair", birth=born, partner=t1.track_id)
        t1.partner = t2.track_id
    for loc, kind in entries:
        tk.spawn(sigma_new, loc, kind, "entered")

    if len(tk.live) != tally.total:
        raise TrackingError(
            f"live track count {len(tk.live)} != extremum count {tally.total} "
            f"at sigma={sigma_new:g}"
        )
    return path_new


def _ladder(sigma_max, sigma_min, fraction, checkpoints):
    marks = sorted({float(c) for c in (() if checkpoints is None else checkpoints)
                    if sigma_min < c < sigma_max}, reverse=True)
    levels = [sigma_max]
    cur = sigma_max
    while cur > sigma_min:
        nxt = cur * (1.0 - fraction)
        for c in marks:
            if nxt < c < cur:
                nxt = c
                break
        if nxt <= sigma_min:
            nxt = sigma_min
        levels.append(nxt)
        cur = nxt
    return levels


def track_extrema(
    config: PointConfiguration,
    sigma_range: tuple[float, float],
    interval: tuple[float, float],
    dsigma_fraction: float = 0.02,
    refine_tol: float = 1e-9,
    checkpoints: Optional[Sequence[float]] = None,
) -> list[ExtremaTrack]:
    """Follow every extremum of the path from sigma_max down to sigma_min.

    Stepping is multiplicative (default sigma/50 per level).  Each live
    track is advanced by the drift predictor and re-matched against a fresh
    count_extrema scan; zeros that match no prediction open new tracks,
    in interior max/min pairs whose birth scale is refined by bisection,
    or singly at the interval edge.  A track whose prediction dies in the
    interior is a continuation failure: the step is bisected up to eight
    times before a tracking error is raised.
    """
    sigma_min, sigma_max = sigma_range
    if not 0 < sigma_min < sigma_max:
        raise ParameterError(f"need 0 < sigma_min < sigma_max, got {sigma_range}")
    if not 0 < dsigma_fraction < 0.5:
        raise ParameterError(f"dsigma_fraction out of range: {dsigma_fraction}")

    tk = _Tracker(config, (float(interval[0]), float(interval[1])), refine_tol)
    levels = _ladder(sigma_max, sigma_min, dsigma_fraction, checkpoints)
    path = tk.path_at(levels[0])
    first = count_extrema(path)
    if "degenerate" in first.kinds:
        raise TrackingError(f"degenerate extremum at the starting scale {sigma_max:g}")
    for loc, kind in zip(first.locations, first.kinds):
        tk.spawn(levels[0], float(loc), kind, "initial")

    sigma_old = levels[0]
    for sigma_new in levels[1:]:
        path = _advance(tk, sigma_old, path, sigma_new)
        sigma_old = sigma_new
    return tk.tracks


@dataclass(frozen=True)
class RhoMonotonicityReport:
    curve: RhoCurve
    counts: np.ndarray                 # replications x len(sigma_grid)
    per_config_violations: list
    curve_monotone: bool
    tracking_diagnostics: list
    passed: bool


def rho_monotonicity_report(
    lam: float,
    sigma_grid: Sequence[float],
    replications: int,
    master_seed: int,
    interval: Optional[tuple[float, float]] = None,
    impulses: Optional[ImpulseSpec] = None,
    audit_tracks: int = 2,
    threads: int = 1,
) -> RhoMonotonicityReport:
    """Extremum counts across sigma under common random numbers.

    The same configuration is re-evaluated at every sigma, so the per
    configuration counts must be non-increasing replication by replication.
    The first audit_tracks configurations are additionally followed with
    track_extrema through the whole grid and the live track counts checked
    against the direct counts; mismatches and tracking failures surface as
    diagnostics rather than exceptions.
    """
    sg = np.asarray(sigma_grid, dtype=float)
    if sg.ndim != 1 or len(sg) < 2 or np.any(np.diff(sg) <= 0) or sg[0] <= 0:
        raise ParameterError("sigma_grid must be increasing and positive")
    spec = impulses if impulses is not None else _DEFAULT_IMPULSES
    if interval is None:
        interval = (0.0, 50.0 * float(sg[-1]))
    length = interval[1] - interval[0]
    kern_max = gaussian_kernel(float(sg[-1]))

    def one(r: int):
        cfg = config_for_interval(lam, kern_max, interval, spec,
                                  stream(master_seed, r), max_order=3)
        row = []
        for s in sg:
            path = evaluate_path(cfg, gaussian_kernel(float(s)), interval, max_order=2)
            row.append(count_extrema(path, refine=False).total)
        return cfg, row

    results = pmap(one, replications, threads)
    counts = np.array([row for _, row in results], dtype=int)

    violations = []
    for r in range(replications):
        for j in range(len(sg) - 1):
            if counts[r, j + 1] > counts[r, j]:
                violations.append((r, float(sg[j]), float(sg[j + 1]),
                                   int(counts[r, j]), int(counts[r, j + 1])))

    rho = counts.mean(axis=0) / length
    se = counts.std(axis=0, ddof=1) / math.sqrt(replications) / length
    curve = RhoCurve(axis=sg, rho=rho, se=se, replications=replications, length=length)
    monotone = True
    for j in range(len(sg) - 1):
        if rho[j + 1] > rho[j] + 2.0 * math.hypot(se[j], se[j + 1]):
            monotone = False

    diagnostics = []
    for r in range(min(audit_tracks, replications)):
        cfg = results[r][0]
        try:
            tracks = track_extrema(cfg, (float(sg[0]), float(sg[-1])), interval,
                                   checkpoints=sg)
        except TrackingError as exc:
            diagnostics.append(f"replication {r}: {exc}")
            continue
        for j, s in enumerate(sg):
            alive = sum(any(ss == s for ss, _ in tr.samples) for tr in tracks)
            if alive != counts[r, j]:
                diagnostics.append(
                    f"replication {r}: {alive} tracks vs {counts[r, j]} extrema "
                    f"at sigma={s:g}"
                )

    return RhoMonotonicityReport(
        curve=curve,
        counts=counts,
        per_config_violations=violations,
        curve_monotone=monotone,
        tracking_diagnostics=diagnostics,
        passed=not violations and monotone and not diagnostics,
    )
