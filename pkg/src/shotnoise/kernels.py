"""Smoothing kernels: derivatives, tails, moment functionals, phase data.

The built-in Gaussian kernel g_sigma carries closed forms for everything:
derivatives are Hermite-polynomial multiples of the density, absolute tail
integrals reduce to signed primitives split at the Hermite roots, and the
autocorrelation is again a Gaussian at width sigma*sqrt(2).  Other kernels
can be registered with callables and a tail descriptor; operations that
need more derivatives than a model provides raise CapabilityError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import (
    AccuracyError,
    CapabilityError,
    ParameterError,
    PhaseDegeneracyError,
)

# Probabilists' Hermite polynomials He_k and their real roots, k <= 4.
_HERMITE = (
    np.poly1d([1.0]),
    np.poly1d([1.0, 0.0]),
    np.poly1d([1.0, 0.0, -1.0]),
    np.poly1d([1.0, 0.0, -3.0, 0.0]),
    np.poly1d([1.0, 0.0, -6.0, 0.0, 3.0]),
)
_HERMITE_ROOTS = (
    (),
    (0.0,),
    (-1.0, 1.0),
    (-math.sqrt(3.0), 0.0, math.sqrt(3.0)),
    (
        -math.sqrt(3.0 + math.sqrt(6.0)),
        -math.sqrt(3.0 - math.sqrt(6.0)),
        math.sqrt(3.0 - math.sqrt(6.0)),
        math.sqrt(3.0 + math.sqrt(6.0)),
    ),
)


@dataclass(frozen=True, eq=False)
class KernelModel:
    """A smooth integrable kernel with derivatives up to order_max."""

    name: str
    family: str
    order_max: int
    derivs: tuple[Callable, ...]            # derivs[k](t) vectorized
    integral: float                         # int g
    tail: Callable[[int, float], float]     # bound on int_{|s|>T} |g^(k)|
    sigma: Optional[float] = None           # natural width, used for scan scales
    tail_regime: Optional[tuple] = None     # ("superexp", alpha) or ("exp",)
    params: dict = field(default_factory=dict)

    def scale(self) -> float:
        return self.sigma if self.sigma is not None else 1.0

    def l1_norm(self, order: int) -> float:
        return self.tail(order, 0.0)


def eval_derivative(kernel: KernelModel, order: int, t):
    """g^(order)(t); CapabilityError beyond the model's order_max."""
    if not 0 <= order <= kernel.order_max:
        raise CapabilityError(
            f"{kernel.name} provides derivatives up to order {kernel.order_max}, "
            f"requested {order}"
        )
    return kernel.derivs[order](np.asarray(t, dtype=float))


def _phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _gaussian_tail(sigma: float, order: int, T: float) -> float:
    """Exact int_{|s|>T} |g_sigma^(k)|, via signed primitives split at He_k roots."""
    if T < 0:
        raise ParameterError("tail radius must be nonnegative")
    x0 = T / sigma
    if order == 0:
        return float(math.erfc(x0 / math.sqrt(2.0)))
    he_prev = _HERMITE[order - 1]
    cuts = [r for r in _HERMITE_ROOTS[order] if r > x0]
    nodes = [x0, *cuts]
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += abs(he_prev(a) * _phi(a) - he_prev(b) * _phi(b))
    total += abs(he_prev(nodes[-1]) * _phi(nodes[-1]))  # last piece runs to infinity
    return 2.0 * total / sigma**order


def gaussian_kernel(sigma: float) -> KernelModel:
    """Gaussian density of width sigma; derivatives to order 4 in closed form."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    s = float(sigma)

    def deriv(order):
        he = _HERMITE[order]
        sign = (-1.0) ** order

        def f(t, _he=he, _sign=sign):
            x = t / s
            return _sign * _he(x) * _phi(x) / s ** (order + 1)

        return f

    return KernelModel(
        name=f"gaussian:sigma={s:g}",
        family="gaussian",
        order_max=4,
        derivs=tuple(deriv(k) for k in range(5)),
        integral=1.0,
        tail=lambda order, T: _gaussian_tail(s, order, T),
        sigma=s,
        tail_regime=("superexp", 2.0),
        params={"sigma": s},
    )


_REGISTRY: dict[str, Callable[[dict], KernelModel]] = {
    "gaussian": lambda kv: gaussian_kernel(kv.get("sigma", kv.get("σ", 1.0))),
}


def register_kernel(family: str, factory: Callable[[dict], KernelModel]) -> None:
    """Hook for analytic test kernels; factory receives the parsed key/values."""
    _REGISTRY[family] = factory


def parse_kernel(text: str) -> KernelModel:
    """Parse a kernel selector such as 'gaussian:sigma=0.5'."""
    head, _, rest = text.partition(":")
    family = head.strip().lower()
    if family not in _REGISTRY:
        raise ParameterError(f"unknown kernel family {family!r}")
    kv = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            try:
                kv[key.strip()] = float(val)
            except ValueError:
                raise ParameterError(f"bad kernel parameter {item!r}") from None
    return _REGISTRY[family](kv)


@dataclass(frozen=True)
class MomentTable:
    """Moment functionals m_kl = int |g|^k |g'|^l plus the curvature moment."""

    entries: dict          # (k, l) -> value
    errors: dict           # (k, l) -> quadrature error bound
    m0: float              # int g^2
    m2: float              # int g'^2
    m4: float              # int g''^2
    m4_error: float

    def value(self, k: int, l: int) -> float:
        return self.entries[(k, l)]


_DEFAULT_PAIRS = ((2, 0), (0, 2), (3, 0), (0, 3), (1, 2), (2, 2))


def _moment_radius(kernel: KernelModel, orders) -> float:
    # generous: integrands are products of decaying factors, so the widest
    # single-factor radius already certifies the product tail
    R = 0.0
    step = kernel.scale()
    for k in orders:
        T = 0.0
        while kernel.tail(k, T) > 1e-14 and T < 400 * step:
            T += step
        R = max(R, T)
    return R + step


def moments(kernel: KernelModel, pairs=_DEFAULT_PAIRS, tol: float = 1e-9) -> MomentTable:
    """Quadrature of the m_kl functionals to absolute error <= tol."""
    if kernel.order_max < 2:
        raise CapabilityError("moment table needs two derivatives")
    R = _moment_radius(kernel, (0, 1, 2))
    g = kernel.derivs[0]
    gp = kernel.derivs[1]
    entries, errors = {}, {}
    wanted = dict.fromkeys([*pairs, (2, 0), (0, 2)])  # m0, m2 always present
    for k, l in wanted:
        fn = lambda sv, _k=k, _l=l: np.abs(g(sv)) ** _k * np.abs(gp(sv)) ** _l
        val, err = integrate.quad(fn, -R, R, points=[0.0], limit=400, epsabs=tol * 1e-3)
        if err > tol:
            raise AccuracyError(f"moment ({k},{l}) error {err:.2e} > {tol:.1e}", err, tol)
        entries[(k, l)] = val
        errors[(k, l)] = err
    gpp = kernel.derivs[2]
    m4, m4_err = integrate.quad(lambda sv: gpp(sv) ** 2, -R, R, limit=400, epsabs=tol * 1e-3)
    if m4_err > tol:
        raise AccuracyError(f"curvature moment error {m4_err:.2e} > {tol:.1e}", m4_err, tol)
    return MomentTable(
        entries=entries,
        errors=errors,
        m0=entries[(2, 0)],
        m2=entries[(0, 2)],
        m4=m4,
        m4_error=m4_err,
    )


def covariance(kernel: KernelModel, tau) -> np.ndarray:
    """Autocorrelation S(tau) = int g(s) g(s + tau) ds of the unit-rate limit."""
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    R = _moment_radius(kernel, (0,))
    g = kernel.derivs[0]
    out = np.empty_like(taus)
    for i, tv in enumerate(taus):
        val, _ = integrate.quad(
            lambda sv: g(sv) * g(sv + tv), -R - abs(tv), R + abs(tv), limit=400,
            epsabs=1e-12,
        )
        out[i] = val
    return out if np.ndim(tau) else float(out[0])


def truncation_radius(kernel: KernelModel, order: int, lam: float, eps: float) -> float:
    """Smallest grid-searched T with lam * tail(order, T) <= eps.

    The grid has step scale/4 starting at zero, so the result is monotone
    in eps by construction.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if lam < 0:
        raise ParameterError(f"lam must be nonnegative, got {lam}")
    if lam == 0:
        return 0.0
    if not 0 <= order <= kernel.order_max:
        raise CapabilityError(f"no derivative of order {order} on {kernel.name}")
    step = kernel.scale() / 4.0
    T = 0.0
    limit = 400 * kernel.scale()
    while lam * kernel.tail(order, T) > eps:
        T += step
        if T > limit:
            raise ParameterError(
                f"no radius below {limit:g} meets eps={eps:.1e} at lam={lam:g}"
            )
    return T


@dataclass(frozen=True)
class PhaseParams:
    """Certified phase data for the oscillatory-integral bounds."""

    mode: str
    interval: tuple[float, float]
    modulus: float        # m: min of the phase-derivative modulus over the interval
    degenerate_count: int  # n0: zeros of the degeneracy function on the interval


# Degeneracy threshold for the modulus m.
_PHASE_TOL = 1e-12
_SCAN_N = 4096


def _scan_zero_count(fvals: np.ndarray, xs: np.ndarray, f: Callable) -> int:
    """Count zeros on a scan: sign changes bisected to 1e-12, plus touching runs."""
    count = 0
    sgn = np.sign(fvals)
    touching = np.abs(fvals) < _PHASE_TOL
    # touching zeros: one per maximal run of near-zero nodes
    in_run = False
    for flag in touching:
        if flag and not in_run:
            count += 1
            in_run = True
        elif not flag:
            in_run = False
    # strict sign changes between non-touching nodes
    for i in range(len(xs) - 1):
        if touching[i] or touching[i + 1]:
            continue
        if sgn[i] * sgn[i + 1] < 0:
            optimize.bisect(f, xs[i], xs[i + 1], xtol=1e-12)
            count += 1
    return count


def phase_params(kernel: KernelModel, interval: tuple[float, float], mode: str) -> PhaseParams:
    """Compute (m, n0) for the one- or two-dimensional oscillatory bound.

    mode "1d-level": phase g, m = min sqrt(g'^2 + g''^2), n0 = #zeros of g''.
    mode "2d-joint": phases (g, g'), m = min over the interval of the smallest
    singular value of [[g', g''], [g'', g''']], n0 = #zeros of det of the
    derivative matrix [[g'', g'''], [g''', g'''']].
    """
    a, b = interval
    if not b > a:
        raise ParameterError(f"interval must have positive length, got {interval}")
    xs = np.linspace(a, b, _SCAN_N + 1)
    if mode == "1d-level":
        if kernel.order_max < 2:
            raise CapabilityError("1d phase data needs two derivatives")
        g1 = kernel.derivs[1](xs)
        g2 = kernel.derivs[2](xs)
        mod = np.hypot(g1, g2)
        m = _refine_min(lambda t: np.hypot(kernel.derivs[1](t), kernel.derivs[2](t)), xs, mod)
        n0 = _scan_zero_count(g2, xs, kernel.derivs[2])
    elif mode == "2d-joint":
        if kernel.order_max < 4:
            raise CapabilityError("2d phase data needs four derivatives")
        g1, g2, g3, g4 = (kernel.derivs[k](xs) for k in (1, 2, 3, 4))

        def smin_at(t):
            d1, d2, d3 = (kernel.derivs[k](t) for k in (1, 2, 3))
            return _smin_2x2(d1, d2, d2, d3)

        mod = _smin_2x2(g1, g2, g2, g3)
        m = _refine_min(smin_at, xs, mod)
        det_prime = g2 * g4 - g3 * g3
        n0 = _scan_zero_count(
            det_prime,
            xs,
            lambda t: kernel.derivs[2](t) * kernel.derivs[4](t) - kernel.derivs[3](t) ** 2,
        )
    else:
        raise ParameterError(f"unknown phase mode {mode!r}")
    if m < _PHASE_TOL:
        raise PhaseDegeneracyError(
            f"phase modulus {m:.3e} below {_PHASE_TOL:.0e} on {interval} ({mode})"
        )
    return PhaseParams(mode=mode, interval=(float(a), float(b)), modulus=float(m), degenerate_count=int(n0))


def _smin_2x2(a, b, c, d):
    """Smallest singular value of [[a, b], [c, d]], vectorized."""
    fro = a * a + b * b + c * c + d * d
    det = a * d - b * c
    gap = np.sqrt(np.maximum(fro * fro - 4.0 * det * det, 0.0))
    return np.sqrt(np.maximum(0.5 * (fro - gap), 0.0))


def _refine_min(f, xs, fvals):
    """Polish the scan minimum inside its bracketing cell."""
    i = int(np.argmin(fvals))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded")
        return min(float(fvals[i]), float(res.fun))
    return float(fvals[i])
