"""Level crossings, extrema, Kac functionals, and Monte Carlo curves.

Counting walks the stored grid for sign changes, then refines each bracket
by bisection on the exact point-sum evaluator, so located roots are as good
as the truncation certificate allows.  Near-tangent intervals are never
silently resolved: nodes where both the residual and the derivative sit
below tolerance are flagged once per maximal run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CapabilityError, ParameterError
from .kernels import KernelModel
from .paths import SamplePath, config_for_interval, evaluate_path, normalize_path
from .ppp import ImpulseSpec, merge_configs, sample_conditional, sample_ppp, stream
from ._pool import pmap

# Relative tolerances for tangency / degeneracy flags.
_FLAG_REL = 1e-9


def _scale(arr: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(arr))) if len(arr) else 1.0)


def _zero_runs(s: np.ndarray):
    """Maximal runs of exact zeros in a sign array.

    Yields (j0, j1, left, right): inclusive run bounds and flanking signs,
    with 0 for a flank at the array boundary.  Kernel truncation makes the
    path exactly zero between distant points, so zeros arrive in long runs
    that must count as at most one event each.
    """
    z = s == 0
    if not z.any():
        return []
    dz = np.diff(z.astype(np.int8))
    starts = list(np.flatnonzero(dz == 1) + 1)
    ends = list(np.flatnonzero(dz == -1))
    if z[0]:
        starts.insert(0, 0)
    if z[-1]:
        ends.append(len(s) - 1)
    return [
        (a, b, (s[a - 1] if a > 0 else 0), (s[b + 1] if b + 1 < len(s) else 0))
        for a, b in zip(starts, ends)
    ]


def _run_count(mask: np.ndarray) -> int:
    """Number of maximal True runs."""
    if not mask.any():
        return 0
    m = mask.astype(np.int8)
    return int(m[0] + np.sum((m[1:] - m[:-1]) == 1))


def _bisect_batch(f, lo, hi, flo, iters):
    """Vectorized bisection; keeps the sign change inside [lo, hi].

    An exact zero at a midpoint collapses that bracket on the spot;
    symmetric configurations hit this case routinely.
    """
    lo = lo.copy()
    hi = hi.copy()
    flo = flo.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        exact = fm == 0.0
        left = flo * fm < 0
        hi = np.where(left | exact, mid, hi)
        lo = np.where(left & ~exact, lo, mid)
        flo = np.where(left | exact, flo, fm)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CrossingTally:
    """Classified crossing count of one path at one level."""

    level: float
    interval: tuple[float, float]
    up: int
    down: int
    tangency_suspect: int
    locations: np.ndarray
    residuals: np.ndarray
    kinds: tuple[str, ...]

    @property
    def total(self) -> int:
        return self.up + self.down + self.tangency_suspect


def count_crossings(
    path: SamplePath,
    level: float,
    refine_tol: Optional[float] = None,
    refine: bool = True,
) -> CrossingTally:
    """Count and classify crossings of the level over the path interval.

    Sign changes between grid nodes are bisected to refine_tol (default
    h * 1e-6) on the exact evaluator; the crossing direction comes from the
    sign of X' at the root.  A maximal run of exact node hits counts once:
    as a crossing when the flanking signs differ, as a tangency when they
    agree, and not at all when the run touches the interval boundary.
    """
    d = path.x - level
    dx = path.dx
    v_tol = _FLAG_REL * _scale(path.x)
    d_tol = _FLAG_REL * _scale(dx)
    if refine_tol is None:
        refine_tol = path.step * 1e-6

    s = np.sign(d)
    i = np.flatnonzero((s[:-1] * s[1:]) < 0)

    locations = []
    residuals = []
    kinds = []
    up = down = suspect = 0

    if len(i):
        if refine:
            iters = max(1, math.ceil(math.log2(max(path.step / refine_tol, 2.0))))
            f = lambda ts: path.evaluator(ts, 0) - level
            roots = _bisect_batch(f, path.grid[i], path.grid[i + 1], d[i], iters)
            res = f(roots)
            slope = path.evaluator(roots, 1)
        else:
            # linear interpolation inside the bracket; direction from the bracket
            t0 = path.grid[i]
            roots = t0 + path.step * d[i] / (d[i] - d[i + 1])
            res = np.zeros_like(roots)
            slope = np.where(d[i] < 0, 1.0, -1.0) * (2 * d_tol)
        for root, r, sl in zip(roots, res, slope):
            locations.append(float(root))
            residuals.append(float(abs(r)))
            if abs(sl) <= d_tol:
                kinds.append("tangency")
                suspect += 1
            elif sl > 0:
                kinds.append("up")
                up += 1
            else:
                kinds.append("down")
                down += 1

    for j0, j1, left, right in _zero_runs(s):
        if left == 0 or right == 0:
            continue
        locations.append(float(0.5 * (path.grid[j0] + path.grid[j1])))
        residuals.append(0.0)
        if left * right < 0:
            if right > 0:
                kinds.append("up")
                up += 1
            else:
                kinds.append("down")
                down += 1
        else:
            kinds.append("tangency")
            suspect += 1

    # near-tangent runs that never produce a sign change
    graze = (np.abs(d) < v_tol) & (np.abs(dx) < d_tol) & (s != 0)
    suspect += _run_count(graze)

    order = np.argsort(locations) if locations else []
    return CrossingTally(
        level=float(level),
        interval=path.interval,
        up=up,
        down=down,
        tangency_suspect=suspect,
        locations=np.asarray(locations, dtype=float)[order] if len(locations) else np.empty(0),
        residuals=np.asarray(residuals, dtype=float)[order] if len(residuals) else np.empty(0),
        kinds=tuple(np.asarray(kinds, dtype=object)[order]) if len(kinds) else (),
    )


@dataclass(frozen=True)
class ExtremaTally:
    """Classified zeros of X' over the path interval."""

    interval: tuple[float, float]
    maxima: int
    minima: int
    degenerate: int
    locations: np.ndarray
    kinds: tuple[str, ...]

    @property
    def total(self) -> int:
        return self.maxima + self.minima + self.degenerate


def _double_root_cells(path: SamplePath):
    """Split cells hiding a zero pair of X' (extremum of X' dips across zero).

    Cells with no sign change of X' but a sign change of X'' are checked at
    the interior zero of X''; when X' changes sign there, the cell holds two
    roots.  Returns extra brackets (lo, hi, f_lo, f_hi) to refine.
    """
    if path.d2x is None:
        return []
    dx, d2x = path.dx, path.d2x
    # the dip below the chord is at most h * max |X''| at the ends (with a
    # factor-2 margin), so cells whose endpoint |X'| exceeds that cannot
    # hide roots; this prunes the candidate set by orders of magnitude
    dip = path.step * np.maximum(np.abs(d2x[:-1]), np.abs(d2x[1:]))
    cand = np.flatnonzero(
        (np.sign(dx[:-1]) * np.sign(dx[1:]) > 0)
        & (np.sign(d2x[:-1]) * np.sign(d2x[1:]) < 0)
        & (np.minimum(np.abs(dx[:-1]), np.abs(dx[1:])) <= dip)
    )
    if not len(cand):
        return []
    f2 = lambda ts: path.evaluator(ts, 2)
    tstar = _bisect_batch(f2, path.grid[cand], path.grid[cand + 1], d2x[cand], 30)
    dx_star = path.evaluator(tstar, 1)
    extra = []
    for j, ts_, v in zip(cand, tstar, dx_star):
        if np.sign(v) != 0 and np.sign(v) != np.sign(dx[j]):
            extra.append((path.grid[j], ts_, dx[j], v))
            extra.append((ts_, path.grid[j + 1], v, dx[j + 1]))
    return extra


def count_extrema(
    path: SamplePath,
    refine_tol: Optional[float] = None,
    flag_rel: float = _FLAG_REL,
    refine: bool = True,
) -> ExtremaTally:
    """Count zeros of X', classified by the sign of X'' at each root.

    flag_rel sets the relative threshold below which |X''| at a refined
    root is reported as degenerate rather than a maximum or minimum.
    A maximal run of exact zeros of X' (the path is identically zero in
    truncation dead zones) counts as one extremum when the flanking signs
    differ and as none when they agree or the run hits the boundary.
    refine=False skips the bisection polish: locations are linear
    interpolants and the kind comes from the bracket direction, which is
    what counting campaigns need at a fraction of the cost.
    """
    if path.d2x is None:
        raise CapabilityError("count_extrema needs the second derivative on the path")
    dx = path.dx
    d2_tol = flag_rel * _scale(path.d2x)
    if refine_tol is None:
        refine_tol = path.step * 1e-6

    s = np.sign(dx)
    i = np.flatnonzero((s[:-1] * s[1:]) < 0)

    lo = list(path.grid[i])
    hi = list(path.grid[i + 1])
    flo = list(dx[i])
    fhi = list(dx[i + 1])
    for a, b, fa, fb in _double_root_cells(path):
        lo.append(a)
        hi.append(b)
        flo.append(fa)
        fhi.append(fb)

    locations = []
    kinds = []
    if lo:
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        flo = np.asarray(flo)
        if refine:
            iters = max(1, math.ceil(math.log2(max(path.step / refine_tol, 2.0))))
            f1 = lambda ts: path.evaluator(ts, 1)
            roots = _bisect_batch(f1, lo, hi, flo, iters)
            curv = path.evaluator(roots, 2)
        else:
            fhi = np.asarray(fhi)
            roots = lo + (hi - lo) * flo / (flo - fhi)
            # kind from the bracket direction; the degenerate flag needs a
            # curvature value, interpolated from the stored grid samples
            cell = np.clip(np.searchsorted(path.grid, roots, side="right") - 1,
                           0, len(path.grid) - 2)
            w = (roots - path.grid[cell]) / path.step
            c_est = path.d2x[cell] * (1.0 - w) + path.d2x[cell + 1] * w
            curv = np.where(np.abs(c_est) <= d2_tol, 0.0,
                            np.where(flo > 0, -1.0, 1.0) * (2 * d2_tol))
        for root, c in zip(roots, curv):
            locations.append(float(root))
            if abs(c) <= d2_tol:
                kinds.append("degenerate")
            elif c < 0:
                kinds.append("max")
            else:
                kinds.append("min")

    for j0, j1, left, right in _zero_runs(s):
        if left * right >= 0:
            continue      # boundary run or sign-preserving touch: no extremum
        locations.append(float(0.5 * (path.grid[j0] + path.grid[j1])))
        kinds.append("min" if right > 0 else "max")

    order = np.argsort(locations) if locations else []
    kinds = tuple(np.asarray(kinds, dtype=object)[order]) if len(kinds) else ()
    return ExtremaTally(
        interval=path.interval,
        maxima=sum(k == "max" for k in kinds),
        minima=sum(k == "min" for k in kinds),
        degenerate=sum(k == "degenerate" for k in kinds),
        locations=np.asarray(locations, dtype=float)[order] if len(locations) else np.empty(0),
        kinds=kinds,
    )


def kac_estimate(path: SamplePath, level: float, delta: float) -> float:
    """Trapezoid Kac functional (1 / 2 delta) int 1_{|X - level| < delta} |X'|."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    mask = np.abs(path.x - level) < delta
    return float(np.trapezoid(mask * np.abs(path.dx), path.grid) / (2.0 * delta))


def total_variation(path: SamplePath) -> float:
    """Trapezoid integral of |X'| over the interval."""
    return float(np.trapezoid(np.abs(path.dx), path.grid))


def exp_poly_extrema_bound(n_points: int, derivative_order: int = 1) -> int:
    """Zero-count bound for the order-th derivative of a Gaussian point sum.

    Each point contributes a polynomial of degree equal to the derivative
    order times an exponential, so the zero count is at most
    (order + 1) * n - 1.  Empty configurations have no zeros at all.
    """
    if n_points < 0 or derivative_order < 1:
        raise ParameterError("need n_points >= 0 and derivative_order >= 1")
    if n_points == 0:
        return 0
    return (derivative_order + 1) * n_points - 1


@dataclass(frozen=True)
class RolleReport:
    passed: bool
    extrema_total: int
    violations: tuple


def rolle_check(path: SamplePath, levels: Sequence[float]) -> RolleReport:
    """Assert crossings(level) <= extrema + 1 for every level."""
    ext = count_extrema(path, refine=False).total
    violations = []
    for level in levels:
        tally = count_crossings(path, level, refine=False)
        if tally.total > ext + 1:
            violations.append((float(level), tally.total, ext))
    return RolleReport(passed=not violations, extrema_total=ext, violations=tuple(violations))


@dataclass(frozen=True)
class CrossingCurve:
    """Monte Carlo mean crossing counts per level, with byproducts.

    The total-variation and co-area columns reuse the same replications, so
    the co-area gap is a paired estimate: per path, trapezoid of the level
    counts over the level grid minus the total variation.
    """

    levels: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    up_mean: np.ndarray
    down_mean: np.ndarray
    tangency_rate: np.ndarray
    replications: int
    interval: tuple[float, float]
    lam: float
    normalized: bool
    tv_mean: float
    tv_se: float
    coarea_gap_mean: float
    coarea_gap_se: float


def _tally_levels(x, dx, levels, v_tol, d_tol):
    """Vectorized per-level (up, down, suspect) counts on the grid.

    Transitions are taken between consecutive nonzero signs, so a run of
    exact node hits (truncation dead zone) counts once; a run whose flanks
    agree counts as a tangency suspect, matching count_crossings.
    """
    n = len(x)
    d = x[None, :] - levels[:, None]
    s = np.sign(d).astype(np.int8)
    nz = s != 0
    # index of the last nonzero sign at or before each node, -1 if none yet
    idx = np.where(nz, np.arange(n)[None, :], -1)
    np.maximum.accumulate(idx, axis=1, out=idx)
    prev_idx = idx[:, :-1]
    cur = s[:, 1:]
    valid = (cur != 0) & (prev_idx >= 0)
    prev = np.take_along_axis(s, np.maximum(prev_idx, 0), axis=1)
    cross = valid & (prev * cur < 0)
    up = (cross & (cur > 0)).sum(axis=1)
    down = (cross & (cur < 0)).sum(axis=1)
    # a zero run whose flanks agree is a grazing touch of the level
    suspect = (valid & (prev * cur > 0) & (s[:, :-1] == 0)).sum(axis=1)
    graze = (np.abs(d) < v_tol) & (np.abs(dx)[None, :] < d_tol) & nz
    if graze.any():
        g = graze.astype(np.int8)
        suspect = suspect + g[:, 0] + ((g[:, 1:] - g[:, :-1]) == 1).sum(axis=1)
    return up, down, suspect


def mc_crossing_curve(
    lam: float,
    kernel: KernelModel,
    impulses: ImpulseSpec,
    levels: Sequence[float],
    interval: tuple[float, float],
    replications: int,
    master_seed: int,
    conditioning: Optional[dict] = None,
    normalized: bool = False,
    step: Optional[float] = None,
    eps_target: float = 1e-8,
    threads: int = 1,
) -> CrossingCurve:
    """Mean crossing counts per level over independent replications.

    conditioning = {"T": T, "k0": k} restricts the center window [-T, T] to
    hold at least k points; the flanks stay unconditioned, which preserves
    the conditional law by superposition.
    """
    levels = np.asarray(sorted(float(v) for v in levels))
    if not len(levels):
        raise ParameterError("need at least one level")

    def one(r: int):
        strm = stream(master_seed, r)
        if conditioning is None:
            cfg = config_for_interval(
                lam, kernel, interval, impulses, strm, max_order=1, eps_target=eps_target
            )
        else:
            T, k0 = float(conditioning["T"]), int(conditioning["k0"])
            probe = config_for_interval(
                lam, kernel, interval, impulses, strm, max_order=1, eps_target=eps_target
            )
            w0, w1 = probe.window
            if not (w0 <= -T and T <= w1):
                raise ParameterError(
                    f"conditioning window [-{T:g}, {T:g}] exceeds buffered window ({w0:g}, {w1:g})"
                )
            center = sample_conditional(lam, (-T, T), k0, impulses, strm.child(0)).config
            cfg = center
            if w0 < -T:
                cfg = merge_configs(sample_ppp(lam, (w0, -T), impulses, strm.child(1)), cfg)
            if T < w1:
                cfg = merge_configs(cfg, sample_ppp(lam, (T, w1), impulses, strm.child(2)))
        p = evaluate_path(cfg, kernel, interval, step=step, max_order=1, eps_target=eps_target)
        if normalized:
            p = normalize_path(p)
        v_tol = _FLAG_REL * _scale(p.x)
        d_tol = _FLAG_REL * _scale(p.dx)
        up, down, suspect = _tally_levels(p.x, p.dx, levels, v_tol, d_tol)
        tv = total_variation(p)
        gap = float(np.trapezoid(up + down + suspect, levels)) - tv
        return up, down, suspect, tv, gap

    rows = pmap(one, replications, threads)
    ups = np.array([r[0] for r in rows], dtype=float)
    downs = np.array([r[1] for r in rows], dtype=float)
    suspects = np.array([r[2] for r in rows], dtype=float)
    tvs = np.array([r[3] for r in rows])
    gaps = np.array([r[4] for r in rows])
    totals = ups + downs + suspects
    n = replications
    return CrossingCurve(
        levels=levels,
        mean=totals.mean(axis=0),
        se=totals.std(axis=0, ddof=1) / math.sqrt(n),
        up_mean=ups.mean(axis=0),
        down_mean=downs.mean(axis=0),
        tangency_rate=suspects.mean(axis=0),
        replications=n,
        interval=(float(interval[0]), float(interval[1])),
        lam=float(lam),
        normalized=normalized,
        tv_mean=float(tvs.mean()),
        tv_se=float(tvs.std(ddof=1) / math.sqrt(n)),
        coarea_gap_mean=float(gaps.mean()),
        coarea_gap_se=float(gaps.std(ddof=1) / math.sqrt(n)),
    )
