"""Sample paths of the smoothed process and ensemble statistics.

A path is the finite sum X(t) = sum_i beta_i g^(k)(t - tau_i) evaluated on a
uniform grid, together with its first derivatives and a certificate bounding
the mean absolute contribution of points omitted beyond the truncation
radius.  Summation is in fixed ascending-point order with pairwise reduction,
so results do not depend on the worker budget of the surrounding campaign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, ParameterError, WindowError
from .kernels import KernelModel, truncation_radius
from .ppp import ImpulseSpec, PointConfiguration, Stream, sample_ppp, stream

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# Above this many (grid x point) entries the evaluation is chunked and each
# chunk only sees points within the truncation radius.
_DENSE_LIMIT = 4_000_000
_CHUNK = 512

# Hermite coefficient rows for the fast multi-order Gaussian path; sign folded in.
_GAUSS_POLY = (
    np.array([1.0]),
    np.array([-1.0, 0.0]),
    np.array([1.0, 0.0, -1.0]),
    np.array([-1.0, 0.0, 3.0, 0.0]),
    np.array([1.0, 0.0, -6.0, 0.0, 3.0]),
)


def _accumulate(points, marks, kernel, orders, ts, out, sl):
    D = ts[:, None] - points[None, :]
    if kernel.family == "gaussian":
        s = kernel.sigma
        x = D / s
        base = np.exp(-0.5 * x * x) * ((_INV_SQRT_2PI / s) * marks)[None, :]
        for k in orders:
            if k == 0:
                vals = base
            else:
                vals = base * (np.polyval(_GAUSS_POLY[k], x) / s**k)
            out[k][sl] = vals.sum(axis=1)
    else:
        for k in orders:
            out[k][sl] = (kernel.derivs[k](D) * marks[None, :]).sum(axis=1)


def _eval_orders(points, marks, kernel, orders, ts, radius=None):
    """Evaluate all requested derivative orders at ts; fixed summation order."""
    out = {k: np.zeros(len(ts)) for k in orders}
    n, m = len(points), len(ts)
    if n == 0 or m == 0:
        return out
    if radius is None or n * m <= _DENSE_LIMIT:
        _accumulate(points, marks, kernel, orders, ts, out, slice(None))
        return out
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        i0 = np.searchsorted(points, ts[lo] - radius, side="left")
        i1 = np.searchsorted(points, ts[hi - 1] + radius, side="right")
        _accumulate(points[i0:i1], marks[i0:i1], kernel, orders, ts[lo:hi], out, slice(lo, hi))
    return out


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Grid evaluation of one configuration, with derivatives and certificate."""

    grid: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    d2x: Optional[np.ndarray]
    d3x: Optional[np.ndarray]
    step: float
    interval: tuple[float, float]
    truncation_error: float                  # max over computed orders
    truncation_per_order: tuple[float, ...]
    provenance: dict
    evaluator: Callable = field(repr=False)  # (ts, order) -> values, same point sums
    config: PointConfiguration = field(repr=False)
    kernel: KernelModel = field(repr=False)

    def deriv(self, order: int) -> np.ndarray:
        arr = (self.x, self.dx, self.d2x, self.d3x)[order]
        if arr is None:
            raise CapabilityError(f"path was evaluated without order {order}")
        return arr

    @property
    def lam(self) -> float:
        return self.provenance["lam"]


def evaluate_path(
    config: PointConfiguration,
    kernel: KernelModel,
    interval: tuple[float, float],
    step: Optional[float] = None,
    max_order: int = 2,
    eps_target: float = 1e-8,
) -> SamplePath:
    """Evaluate the path and derivatives up to max_order on a uniform grid.

    The grid lands exactly on both interval endpoints (the step is rounded
    to divide the length).  The configuration window must extend past the
    interval by the truncation radius on both sides.
    """
    a, b = interval
    if not b > a:
        raise ParameterError(f"interval must have positive length, got {interval}")
    if not 1 <= max_order <= min(3, kernel.order_max):
        raise CapabilityError(f"max_order {max_order} outside 1..{min(3, kernel.order_max)}")
    if step is None:
        step = kernel.scale() / 20.0
    if not step > 0:
        raise ParameterError(f"step must be positive, got {step}")
    n_cells = max(1, round((b - a) / step))
    h = (b - a) / n_cells
    grid = a + h * np.arange(n_cells + 1)
    grid[-1] = b

    lam = config.intensity
    abs_mean = config.impulse_spec.abs_mean
    weight = lam * abs_mean if abs_mean > 0 else lam
    orders = tuple(range(max_order + 1))
    radius = max(truncation_radius(kernel, k, weight, eps_target) for k in orders)
    if config.window[0] > a - radius + 1e-12 or config.window[1] < b + radius - 1e-12:
        raise WindowError(
            f"window {config.window} does not cover [{a - radius:g}, {b + radius:g}] "
            f"needed for interval {interval} at radius {radius:g}"
        )
    per_order = tuple(weight * kernel.tail(k, radius) for k in orders)

    vals = _eval_orders(config.points, config.impulses, kernel, orders, grid, radius)

    def evaluator(ts, order):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return _eval_orders(config.points, config.impulses, kernel, (order,), ts, radius)[order]

    return SamplePath(
        grid=grid,
        x=vals[0],
        dx=vals[1],
        d2x=vals.get(2),
        d3x=vals.get(3),
        step=h,
        interval=(float(a), float(b)),
        truncation_error=max(per_order),
        truncation_per_order=per_order,
        provenance={
            "seed_info": config.seed_info,
            "kernel": kernel.name,
            "lam": lam,
            "normalized": False,
        },
        evaluator=evaluator,
        config=config,
        kernel=kernel,
    )


def normalize_path(path: SamplePath) -> SamplePath:
    """Center by lam * E(beta) * int g and scale by sqrt(lam).

    Derivative means vanish for integrable kernel derivatives, so orders
    above zero are only rescaled.
    """
    if path.provenance.get("normalized"):
        return path
    lam = path.lam
    if not lam > 0:
        raise ParameterError(f"normalization needs a positive intensity, got {lam}")
    shift = lam * path.config.impulse_spec.mean * path.kernel.integral
    root = math.sqrt(lam)
    base = path.evaluator

    def evaluator(ts, order):
        raw = base(ts, order)
        return (raw - shift) / root if order == 0 else raw / root

    prov = dict(path.provenance)
    prov["normalized"] = True
    return SamplePath(
        grid=path.grid,
        x=(path.x - shift) / root,
        dx=path.dx / root,
        d2x=None if path.d2x is None else path.d2x / root,
        d3x=None if path.d3x is None else path.d3x / root,
        step=path.step,
        interval=path.interval,
        truncation_error=path.truncation_error / root,
        truncation_per_order=tuple(e / root for e in path.truncation_per_order),
        provenance=prov,
        evaluator=evaluator,
        config=path.config,
        kernel=path.kernel,
    )


def config_for_interval(
    lam: float,
    kernel: KernelModel,
    interval: tuple[float, float],
    impulses: ImpulseSpec,
    strm: Stream,
    max_order: int = 2,
    eps_target: float = 1e-8,
) -> PointConfiguration:
    """Sample a configuration whose window is buffered for the interval."""
    abs_mean = impulses.abs_mean
    weight = lam * abs_mean if abs_mean > 0 else lam
    radius = max(
        truncation_radius(kernel, k, weight, eps_target) for k in range(max_order + 1)
    )
    window = (interval[0] - radius, interval[1] + radius)
    return sample_ppp(lam, window, impulses, strm)


@dataclass(frozen=True)
class EnsembleStats:
    """Pointwise moments across replications, with standard errors."""

    n: int
    t_ref: float
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    excess_kurtosis_se: float
    covariance: dict       # lag -> (value, se)


def ensemble_statistics(paths: Sequence[SamplePath], lags: Sequence[float] = ()) -> EnsembleStats:
    """Moments at the interval midpoint and covariances at the given lags.

    All paths must share the same grid; lags must land on grid nodes.
    """
    if len(paths) < 100:
        raise ParameterError(f"need at least 100 replications, got {len(paths)}")
    grid = paths[0].grid
    h = paths[0].step
    for p in paths[1:]:
        if len(p.grid) != len(grid) or abs(p.grid[0] - grid[0]) > 1e-12 or abs(p.step - h) > 1e-12:
            raise ParameterError("paths do not share a common grid")
    im = (len(grid) - 1) // 2
    t_ref = grid[im]
    x0 = np.array([p.x[im] for p in paths])
    n = len(x0)

    xc = x0 - x0.mean()
    m2 = np.dot(xc, xc) / (n - 1)
    m2b = np.mean(xc**2)
    m3 = np.mean(xc**3)
    m4 = np.mean(xc**4)
    sd = math.sqrt(m2)
    skew = m3 / m2b**1.5 if m2b > 0 else 0.0
    kurt = m4 / m2b**2 - 3.0 if m2b > 0 else 0.0
    var_se = math.sqrt(max(m4 - (n - 3) / (n - 1) * m2b**2, 0.0) / n)
    skew_se = math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))
    kurt_se = 2.0 * skew_se * math.sqrt((n * n - 1.0) / ((n - 3) * (n + 5)))

    cov = {}
    for lag in lags:
        j = im + round(lag / h)
        if not 0 <= j < len(grid) or abs(grid[j] - (t_ref + lag)) > 1e-9:
            raise ParameterError(f"lag {lag} does not land on the grid")
        xl = np.array([p.x[j] for p in paths])
        yc = xl - xl.mean()
        c = np.dot(xc, yc) / (n - 1)
        c_se = math.sqrt(max(np.mean(xc**2 * yc**2) - c * c, 0.0) / n)
        cov[float(lag)] = (float(c), float(c_se))

    return EnsembleStats(
        n=n,
        t_ref=float(t_ref),
        mean=float(x0.mean()),
        mean_se=float(sd / math.sqrt(n)),
        variance=float(m2),
        variance_se=float(var_se),
        skewness=float(skew),
        skewness_se=float(skew_se),
        excess_kurtosis=float(kurt),
        excess_kurtosis_se=float(kurt_se),
        covariance=cov,
    )


@dataclass(frozen=True)
class SmallBallPoint:
    eps: float
    p_hat: float
    se: float
    bound: float
    asymptotic: bool   # False when eps >= 1 so the tail scale T_eps degenerates
    n: int


def small_ball_bound(lam: float, kernel: KernelModel, eps: float) -> tuple[float, bool]:
    """Lower bound for P(|X(t)| <= eps) from the kernel's tail regime."""
    if kernel.tail_regime is None:
        raise CapabilityError(f"{kernel.name} declares no tail regime")
    regime = kernel.tail_regime[0]
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    log_term = -math.log(eps)
    if regime == "superexp":
        alpha = kernel.tail_regime[1]
        if log_term <= 0:
            return 0.0, False
        T_eps = log_term ** (1.0 / alpha)
        return 0.5 * math.exp(-2.0 * lam * T_eps), True
    if regime == "exp":
        if not lam < 0.25:
            raise ParameterError("exponential-tail bound needs lam < 1/4")
        if log_term <= 0:
            return 0.0, False
        factor = 1.0 - lam / (1.0 - 2.0 * lam) ** 2
        return factor * math.exp(-2.0 * lam * log_term), True
    raise CapabilityError(f"unknown tail regime {kernel.tail_regime!r}")


def small_ball_probability(
    lam: float,
    kernel: KernelModel,
    impulses: ImpulseSpec,
    eps_values: Sequence[float],
    replications: int,
    master_seed: int,
    t: float = 0.0,
) -> list[SmallBallPoint]:
    """Monte Carlo estimate of P(|X(t)| <= eps) with the theoretical bound."""
    eps_values = sorted(float(e) for e in eps_values)
    weight = lam * max(impulses.abs_mean, 1e-300)
    trunc = min(eps_values[0] * 1e-3, 1e-6)
    radius = truncation_radius(kernel, 0, weight, trunc)
    window = (t - radius, t + radius)
    draws = np.empty(replications)
    for r in range(replications):
        cfg = sample_ppp(lam, window, impulses, stream(master_seed, r))
        vals = _eval_orders(cfg.points, cfg.impulses, kernel, (0,), np.array([t]))
        draws[r] = vals[0][0]
    out = []
    for e in eps_values:
        hits = np.abs(draws) <= e
        p = float(hits.mean())
        se = math.sqrt(max(p * (1.0 - p), 1.0 / replications) / replications)
        bound, ok = small_ball_bound(lam, kernel, e)
        out.append(SmallBallPoint(eps=e, p_hat=p, se=se, bound=bound, asymptotic=ok, n=replications))
    return out
