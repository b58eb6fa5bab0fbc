"""Analytic crossing curves via the joint characteristic function.

The Fourier transform in the level of the mean crossing count over [0, L]
equals L times a second difference of the joint characteristic function
psi(u, v) of (X(t), X'(t)), integrated against 1/v^2:

    C_hat(u) = -(L / pi) * int_0^inf (psi(u,v) + psi(u,-v) - 2 psi(u,0)) / v^2 dv

psi has the exponential form exp(lam * int (phi_beta(u g(s) + v g'(s)) - 1) ds),
with a compensated integrand for the centered and sqrt(lam)-scaled process.
The v-integral is truncated at V with the |psi| <= 1 envelope folded into the
reported error; the constant term's tail integrates in closed form, which is
why the envelope charge is 2/V rather than 4/V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import AccuracyError, ParameterError, ResolutionError
from .kernels import KernelModel, MomentTable, covariance, moments, phase_params
from .ppp import ImpulseSpec

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)
# Target phase advance per quadrature panel, radians.
_PANEL_PHASE = 3.0


def _sup_deriv(kernel: KernelModel, order: int) -> float:
    R = 10.0 * kernel.scale()
    xs = np.linspace(-R, R, 8001)
    return float(np.max(np.abs(kernel.derivs[order](xs))))


class _PsiEngine:
    """Evaluates psi(u_i, v) for a fixed u grid and varying v.

    Panel width follows the oscillation rate z_max (|u| M1 + |v| M2) / norm,
    so the composite Gauss panels always resolve the phase; the support
    radius grows with (u, v) through the kernel tail so the neglected
    integrand stays below eps_tail.
    """

    def __init__(
        self,
        lam: float,
        kernel: KernelModel,
        impulses: ImpulseSpec,
        u: np.ndarray,
        normalized: bool,
        eps_tail: float = 1e-13,
        refine: float = 1.0,
    ):
        self.lam = lam
        self.kernel = kernel
        self.impulses = impulses
        self.u = np.asarray(u, dtype=float)
        self.normalized = normalized
        self.norm = math.sqrt(lam) if normalized else 1.0
        self.eps_tail = eps_tail
        self.refine = refine
        self.m0 = _sup_deriv(kernel, 0)
        self.m1 = _sup_deriv(kernel, 1)
        self.m2 = _sup_deriv(kernel, 2)
        self.zmax = self._impulse_scale()
        self.e2 = impulses.second_moment
        self.abs_mean = impulses.abs_mean
        self.mean = impulses.mean
        self._cache: dict[int, tuple] = {}

    def _impulse_scale(self) -> float:
        sp = self.impulses
        if sp.kind == "deterministic-one":
            return 1.0
        if sp.kind == "two-point":
            return max(abs(sp.params[0]), abs(sp.params[1]))
        if sp.kind == "uniform-interval":
            return max(abs(sp.params[0]), abs(sp.params[1]))
        mu, sd = sp.params
        return abs(mu) + 6.0 * sd

    def _radius(self, v: float) -> float:
        umax = float(np.max(np.abs(self.u))) if len(self.u) else 0.0
        step = self.kernel.scale() / 2.0
        R = 4.0 * self.kernel.scale()
        while R < 400 * self.kernel.scale():
            if self.normalized:
                bound = self.e2 * (
                    umax**2 * self.m0 * self.kernel.tail(0, R)
                    + v**2 * self.m1 * self.kernel.tail(1, R)
                )
            else:
                bound = self.lam * self.abs_mean * (
                    umax * self.kernel.tail(0, R) + abs(v) * self.kernel.tail(1, R)
                )
            if bound <= self.eps_tail:
                return R
            R += step
        return R

    def _panels(self, v: float):
        umax = float(np.max(np.abs(self.u))) if len(self.u) else 0.0
        rate = self.zmax * (umax * self.m1 + abs(v) * self.m2) / self.norm
        width = min(self.kernel.scale() / 2.0, _PANEL_PHASE / max(rate, 1e-12)) / self.refine
        R = self._radius(v)
        n = max(8, int(math.ceil(2.0 * R / width)))
        if n not in self._cache:
            edges = np.linspace(-R, R, n + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * (edges[1] - edges[0])
            nodes = (mid[:, None] + half * _GL8_X[None, :]).ravel()
            wts = np.tile(half * _GL8_W, n)
            gs = self.kernel.derivs[0](nodes)
            gps = self.kernel.derivs[1](nodes)
            self._cache[n] = (nodes, wts, gs, gps)
            if len(self._cache) > 64:
                self._cache.pop(next(iter(self._cache)))
        return self._cache[n]

    def log_psi(self, v: float) -> np.ndarray:
        """lam * int (phi_beta(w) - 1 [- i mean w]) ds on the u grid."""
        _, wts, gs, gps = self._panels(v)
        w = (self.u[:, None] * gs[None, :] + v * gps[None, :]) / self.norm
        integrand = self.impulses.charfn(w) - 1.0
        if self.normalized:
            integrand = integrand - 1j * self.mean * w
        return self.lam * (integrand @ wts)

    def psi(self, v: float) -> np.ndarray:
        return np.exp(self.log_psi(v))


def charfn_joint(
    lam: float,
    kernel: KernelModel,
    impulses: ImpulseSpec,
    u: float,
    v: float,
    tol: float = 1e-8,
    normalized: bool = False,
) -> complex:
    """Joint characteristic function E exp(i(uX + vX')) by adaptive quadrature."""
    if not lam > 0:
        raise ParameterError(f"lam must be positive, got {lam}")
    norm = math.sqrt(lam) if normalized else 1.0
    mean = impulses.mean
    g, gp = kernel.derivs[0], kernel.derivs[1]

    engine = _PsiEngine(lam, kernel, impulses, np.array([u]), normalized)
    R = engine._radius(abs(v))

    def integrand(s):
        w = (u * g(s) + v * gp(s)) / norm
        val = impulses.charfn(w) - 1.0
        if normalized:
            val = val - 1j * mean * w
        return val

    epsabs = tol / (8.0 * max(lam, 1.0))
    re, re_err = integrate.quad(lambda s: integrand(s).real, -R, R, limit=400, epsabs=epsabs)
    im, im_err = integrate.quad(lambda s: integrand(s).imag, -R, R, limit=400, epsabs=epsabs)
    if lam * (re_err + im_err) > tol:
        raise AccuracyError(
            f"charfn quadrature error {lam * (re_err + im_err):.2e} > {tol:.1e}",
            lam * (re_err + im_err),
            tol,
        )
    return complex(np.exp(lam * (re + 1j * im)))


@dataclass(frozen=True, eq=False)
class SpectralCurve:
    """C_hat on a symmetric u grid with a per-point error budget."""

    u: np.ndarray
    values: np.ndarray          # complex
    quad_error: np.ndarray
    lam: float
    length: float               # interval length L
    normalized: bool
    kernel_name: str
    meta: dict

    def at_zero(self) -> complex:
        i = int(np.argmin(np.abs(self.u)))
        return complex(self.values[i])


def crossing_fourier_curve(
    lam: float,
    kernel: KernelModel,
    impulses: ImpulseSpec,
    u_max: float,
    n_points: int = 4097,
    length: float = 1.0,
    normalized: bool = True,
    v_tol: float = 1e-2,
    quad_tol: float = 1e-6,
) -> SpectralCurve:
    """Compute C_hat(u) on a symmetric grid of n_points (odd) values.

    The truncation point V satisfies 2/V <= v_tol / 2 and the envelope
    charge 2/V is folded into every point's error budget, together with the
    adaptive v-quadrature estimate.
    """
    if n_points < 3 or n_points % 2 == 0:
        raise ParameterError("n_points must be odd and at least 3")
    if not u_max > 0:
        raise ParameterError(f"u_max must be positive, got {u_max}")
    u_full = np.linspace(-u_max, u_max, n_points)
    u_half = u_full[n_points // 2 :]  # 0 .. u_max
    engine = _PsiEngine(lam, kernel, impulses, u_half, normalized)

    V = max(4.0 / v_tol, 16.0)
    # characteristic v where the derivative phase reaches one radian
    v_scale = engine.norm / max(engine.zmax * engine.m1, 1e-12)
    v_floor = 1e-4 * v_scale
    psi0 = engine.psi(0.0)

    def second_diff(v: float) -> np.ndarray:
        vv = max(v, v_floor)  # quadratic limit: integrand is flat below the floor
        num = engine.psi(vv) + engine.psi(-vv) - 2.0 * psi0
        out = num / (vv * vv)
        return np.concatenate([out.real, out.imag])

    res, quad_err = integrate.quad_vec(
        second_diff, 0.0, V, epsabs=quad_tol, epsrel=1e-8, norm="max", limit=200
    )
    half = len(u_half)
    inner = res[:half] + 1j * res[half:]
    # closed-form tail of the constant term: int_V^inf 2 psi0 / v^2 = 2 psi0 / V
    vals_half = -(length / math.pi) * (inner - 2.0 * psi0 / V)
    envelope = 2.0 / V  # |psi| <= 1 on the two oscillatory terms past V
    err_half = (length / math.pi) * (quad_err + envelope) * np.ones(half)

    values = np.concatenate([np.conj(vals_half[1:][::-1]), vals_half])
    errors = np.concatenate([err_half[1:][::-1], err_half])
    return SpectralCurve(
        u=u_full,
        values=values,
        quad_error=errors,
        lam=float(lam),
        length=float(length),
        normalized=normalized,
        kernel_name=kernel.name,
        meta={"V": V, "v_floor": v_floor, "quad_err": float(quad_err)},
    )


def crossing_fourier(
    lam: float,
    kernel: KernelModel,
    impulses: ImpulseSpec,
    u: float,
    length: float = 1.0,
    normalized: bool = False,
    v_tol: float = 1e-2,
    quad_tol: float = 1e-8,
) -> tuple[complex, float]:
    """Single-point C_hat(u) with its error budget."""
    u = float(u)
    engine = _PsiEngine(lam, kernel, impulses, np.array([abs(u)]), normalized)
    V = max(4.0 / v_tol, 16.0)
    v_scale = engine.norm / max(engine.zmax * engine.m1, 1e-12)
    v_floor = 1e-4 * v_scale
    psi0 = engine.psi(0.0)[0]

    def second_diff(v: float) -> np.ndarray:
        vv = max(v, v_floor)
        num = engine.psi(vv)[0] + engine.psi(-vv)[0] - 2.0 * psi0
        out = num / (vv * vv)
        return np.array([out.real, out.imag])

    res, quad_err = integrate.quad_vec(
        second_diff, 0.0, V, epsabs=quad_tol, epsrel=1e-8, norm="max", limit=200
    )
    val = -(length / math.pi) * (res[0] + 1j * res[1] - 2.0 * psi0 / V)
    err = (length / math.pi) * (quad_err + 2.0 / V)
    if u < 0:
        val = np.conj(val)
    return complex(val), float(err)


@dataclass(frozen=True, eq=False)
class InvertedCurve:
    alpha: np.ndarray
    values: np.ndarray
    error: float
    imag_residual: float


def invert_crossing_curve(
    curve: SpectralCurve,
    alpha: Optional[np.ndarray] = None,
    taper_fraction: float = 0.1,
) -> InvertedCurve:
    """Discrete inverse Fourier transform of a spectral curve.

    A cosine taper on the outer fraction of the u range suppresses the
    truncation ringing; the alpha grid must stay inside the alias-free zone
    pi / du and the curve must have decayed at its endpoints.
    """
    u = curve.u
    du = u[1] - u[0]
    peak = float(np.max(np.abs(curve.values)))
    if peak > 0 and abs(curve.values[-1]) > 0.05 * peak:
        raise ResolutionError(
            f"curve magnitude at u_max is {abs(curve.values[-1]) / peak:.2%} of peak; widen the u grid"
        )
    if alpha is None:
        scale = math.sqrt(max(1.0 / max(peak, 1e-12), 1e-12))
        alpha = np.linspace(-6.0 * scale, 6.0 * scale, 481)
    alpha = np.asarray(alpha, dtype=float)
    alias = math.pi / du
    if np.max(np.abs(alpha)) > 0.98 * alias:
        raise ResolutionError(
            f"alpha range {np.max(np.abs(alpha)):.3g} exceeds the alias-free zone {alias:.3g}; "
            "use a denser u grid"
        )

    taper = np.ones_like(u)
    edge = taper_fraction * (u[-1] - u[0]) * 0.5
    if edge > 0:
        ramp_lo = u < u[0] + edge
        ramp_hi = u > u[-1] - edge
        taper[ramp_lo] = 0.5 * (1 - np.cos(math.pi * (u[ramp_lo] - u[0]) / edge))
        taper[ramp_hi] = 0.5 * (1 - np.cos(math.pi * (u[-1] - u[ramp_hi]) / edge))
    w = np.full(len(u), du)
    w[0] *= 0.5
    w[-1] *= 0.5

    phases = np.exp(-1j * np.outer(alpha, u))
    vals = phases @ (w * taper * curve.values) / (2.0 * math.pi)
    err = float(np.sum(w * taper * curve.quad_error) / (2.0 * math.pi))
    return InvertedCurve(
        alpha=alpha,
        values=vals.real,
        error=err,
        imag_residual=float(np.max(np.abs(vals.imag))),
    )


@dataclass(frozen=True)
class GaussianLimit:
    """Second-order data of the centered Gaussian limit process."""

    m0: float
    m2: float
    m4: float
    kernel_name: str

    @property
    def level_rate(self) -> float:
        return math.sqrt(self.m2 / self.m0) / math.pi

    @property
    def extrema_rate(self) -> float:
        return math.sqrt(self.m4 / self.m2) / math.pi


def gaussian_limit(kernel: KernelModel, tol: float = 1e-9) -> GaussianLimit:
    table = moments(kernel, pairs=((2, 0), (0, 2)), tol=tol)
    return GaussianLimit(m0=table.m0, m2=table.m2, m4=table.m4, kernel_name=kernel.name)


def limit_covariance(kernel: KernelModel, tau):
    """Covariance of the Gaussian limit at lag tau (kernel autocorrelation)."""
    return covariance(kernel, tau)


def rice_gaussian(limit: GaussianLimit, alpha, length: float = 1.0):
    """Mean level-crossing count of the Gaussian limit over an interval."""
    a = np.asarray(alpha, dtype=float)
    out = length * limit.level_rate * np.exp(-a * a / (2.0 * limit.m0))
    return out if np.ndim(alpha) else float(out)


def gaussian_fourier(limit: GaussianLimit, u, length: float = 1.0):
    """Fourier transform in the level of the Gaussian crossing curve."""
    uu = np.asarray(u, dtype=float)
    out = length * math.sqrt(2.0 * limit.m2 / math.pi) * np.exp(-0.5 * limit.m0 * uu * uu)
    return out if np.ndim(u) else float(out)


@dataclass(frozen=True)
class ConvergenceConstants:
    """Explicit constants in the Gaussian-agreement bound for C_hat."""

    a1: float
    a2: float
    a3: float
    table: MomentTable

    def valid_u(self, lam: float) -> float:
        return self.a1 * math.sqrt(lam)

    def bound(self, u, lam: float):
        uu = np.abs(np.asarray(u, dtype=float))
        out = (self.a2 + self.a3 * uu) / math.sqrt(lam)
        return out if np.ndim(u) else float(out)


def convergence_constants(kernel: KernelModel, tol: float = 1e-9) -> ConvergenceConstants:
    t = moments(kernel, tol=tol)
    m0, m2 = t.m0, t.m2
    m30 = t.value(3, 0)
    m03 = t.value(0, 3)
    m12 = t.value(1, 2)
    m22 = t.value(2, 2)
    a1 = min(
        math.sqrt(m2 / (2.0 * m22)),
        m2 / (2.0 * m12),
        3.0 * m0 / (2.0 * m30),
    )
    a2 = (24.0 * m30 + 2.0 * m03) / (3.0 * m2)
    a3 = m12 * math.sqrt(math.pi / m2) + 2.0 * math.sqrt(2.0 * math.pi * m2) * m30 * math.exp(
        -1.0
    ) / (3.0 * m0)
    return ConvergenceConstants(a1=a1, a2=a2, a3=a3, table=t)


@dataclass(frozen=True)
class TVBoundCheck:
    lhs: float
    rhs: float
    se_scaled: float
    passed: bool


def total_variation_bound_check(
    lam: float,
    kernel: KernelModel,
    mc_mean_tv: float,
    mc_se: float,
    slack: float = 3.0,
    tol: float = 1e-9,
) -> TVBoundCheck:
    """All-lam bound on |E|X'| / sqrt(lam) - sqrt(2 m2 / pi)|.

    mc_mean_tv is the Monte Carlo mean total variation per unit length of
    the raw process; the bound scales as m3-moment / sqrt(lam).
    """
    t = moments(kernel, pairs=((0, 2), (0, 3)), tol=tol)
    m2 = t.m2
    m3 = t.value(0, 3)
    lhs = abs(mc_mean_tv / math.sqrt(lam) - math.sqrt(2.0 * m2 / math.pi))
    rhs = 14.0 * m3 / (3.0 * math.pi * m2 * math.sqrt(lam))
    se_scaled = mc_se / math.sqrt(lam)
    return TVBoundCheck(lhs=lhs, rhs=rhs, se_scaled=se_scaled, passed=lhs <= rhs + slack * se_scaled)


@dataclass(frozen=True)
class PhaseCertRow:
    target: tuple          # (u,) in 1d mode, (u, v) in 2d mode
    magnitude: float
    bound: float
    applicable: bool
    passed: Optional[bool]


def _oscillatory_modulus(kernel: KernelModel, interval, coeffs, h_base: float):
    """|int exp(i sum_j c_j g^(j))| by phase-resolving composite panels."""
    a, b = interval
    rate = sum(abs(c) * _sup_deriv(kernel, j + 1) for j, c in enumerate(coeffs))
    width = min(h_base, _PANEL_PHASE / max(rate, 1e-12))
    n = max(8, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    nodes = (mid[:, None] + half * _GL8_X[None, :]).ravel()
    wts = np.tile(half * _GL8_W, n)
    phase = np.zeros(len(nodes))
    for j, c in enumerate(coeffs):
        if c != 0.0:
            phase = phase + c * kernel.derivs[j](nodes)
    return abs(np.sum(np.exp(1j * phase) * wts))


def stationary_phase_certify(
    kernel: KernelModel,
    interval: tuple[float, float],
    targets: Sequence,
    mode: str = "1d-level",
    h_base: Optional[float] = None,
) -> list[PhaseCertRow]:
    """Check the oscillatory-integral bounds against measured magnitudes.

    1d mode: targets are frequencies u, phase g, bound
    8 sqrt(2) (2 n0 + 1) / sqrt(m |u|) for |u| > 1/m.  2d mode: targets are
    (u, v) pairs, phase u g + v g', bound 8 sqrt(2) (2 n0 + 3) / sqrt(m r)
    for r = |(u, v)| > 1/m.  Out-of-range targets report not-applicable.
    """
    a, b = interval
    if h_base is None:
        h_base = (b - a) / 64.0
    pp = phase_params(kernel, interval, mode)
    m, n0 = pp.modulus, pp.degenerate_count
    rows = []
    for target in targets:
        if mode == "1d-level":
            u = float(target)
            r = abs(u)
            coeffs = (u,)
            factor = 2 * n0 + 1
            key = (u,)
        else:
            u, v = (float(target[0]), float(target[1]))
            r = math.hypot(u, v)
            coeffs = (u, v)
            factor = 2 * n0 + 3
            key = (u, v)
        applicable = r > 1.0 / m
        if not applicable:
            rows.append(PhaseCertRow(target=key, magnitude=float("nan"), bound=float("nan"),
                                     applicable=False, passed=None))
            continue
        mag = _oscillatory_modulus(kernel, interval, coeffs, h_base)
        bound = 8.0 * math.sqrt(2.0) * factor / math.sqrt(m * r)
        rows.append(PhaseCertRow(target=key, magnitude=float(mag), bound=float(bound),
                                 applicable=True, passed=bool(mag <= bound)))
    return rows
