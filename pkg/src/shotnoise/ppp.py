"""Poisson point configurations with marks.

A configuration is a finite window [w0, w1] holding Poisson(lam * (w1 - w0))
many points, i.i.d. uniform given the count, each carrying an independent
impulse mark.  Streams are counter-based (Philox) and keyed by
(master seed, derivation path), so any configuration can be regenerated
bit-exactly from its seed_info alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import InfeasibleConditioningError, ParameterError

# Rejection sampling below this acceptance probability is refused.
MIN_ACCEPTANCE = 1e-9


@dataclass(frozen=True)
class Stream:
    """Identity of an RNG stream: master seed plus a derivation path.

    The first path entry is the replication index.  ``generator()`` builds
    a fresh Philox generator every call, so two draws from the same Stream
    are identical by construction.
    """

    master_seed: int
    path: tuple[int, ...]

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index: int) -> "Stream":
        return Stream(self.master_seed, self.path + (index,))


def stream(master_seed: int, replication: int = 0) -> Stream:
    """Stream for one replication of a campaign."""
    return Stream(int(master_seed), (int(replication),))


@dataclass(frozen=True)
class ImpulseSpec:
    """Distribution of the i.i.d. impulse marks.

    Kinds
    -----
    deterministic-one : beta = 1, params ()
    two-point         : P(beta=a) = p, P(beta=b) = 1-p, params (a, b, p)
    uniform-interval  : uniform on [lo, hi], params (lo, hi)
    normal            : N(mu, sd^2), params (mu, sd)
    """

    kind: str = "deterministic-one"
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "deterministic-one":
            if self.params:
                raise ParameterError("deterministic-one takes no parameters")
        elif self.kind == "two-point":
            if len(self.params) != 3 or not (0.0 <= self.params[2] <= 1.0):
                raise ParameterError("two-point needs (a, b, p) with p in [0,1]")
        elif self.kind == "uniform-interval":
            if len(self.params) != 2 or not self.params[0] < self.params[1]:
                raise ParameterError("uniform-interval needs (lo, hi) with lo < hi")
        elif self.kind == "normal":
            if len(self.params) != 2 or not self.params[1] > 0:
                raise ParameterError("normal needs (mu, sd) with sd > 0")
        else:
            raise ParameterError(f"unknown impulse kind {self.kind!r}")

    @property
    def mean(self) -> float:
        if self.kind == "deterministic-one":
            return 1.0
        if self.kind == "two-point":
            a, b, p = self.params
            return a * p + b * (1.0 - p)
        if self.kind == "uniform-interval":
            lo, hi = self.params
            return 0.5 * (lo + hi)
        mu, _ = self.params
        return mu

    @property
    def second_moment(self) -> float:
        if self.kind == "deterministic-one":
            return 1.0
        if self.kind == "two-point":
            a, b, p = self.params
            return a * a * p + b * b * (1.0 - p)
        if self.kind == "uniform-interval":
            lo, hi = self.params
            return (lo * lo + lo * hi + hi * hi) / 3.0
        mu, sd = self.params
        return mu * mu + sd * sd

    @property
    def abs_mean(self) -> float:
        """E|beta|, exact for every kind."""
        if self.kind == "deterministic-one":
            return 1.0
        if self.kind == "two-point":
            a, b, p = self.params
            return abs(a) * p + abs(b) * (1.0 - p)
        if self.kind == "uniform-interval":
            lo, hi = self.params
            if lo >= 0.0:
                return 0.5 * (lo + hi)
            if hi <= 0.0:
                return -0.5 * (lo + hi)
            return (lo * lo + hi * hi) / (2.0 * (hi - lo))
        mu, sd = self.params
        from math import erf, exp, pi, sqrt

        return sd * sqrt(2.0 / pi) * exp(-mu * mu / (2 * sd * sd)) + mu * erf(
            mu / (sd * sqrt(2.0))
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "deterministic-one":
            return np.ones(n)
        if self.kind == "two-point":
            a, b, p = self.params
            return np.where(rng.random(n) < p, a, b)
        if self.kind == "uniform-interval":
            lo, hi = self.params
            return rng.uniform(lo, hi, n)
        mu, sd = self.params
        return rng.normal(mu, sd, n)

    def charfn(self, w):
        """E exp(i w beta), vectorized in w."""
        w = np.asarray(w, dtype=float)
        if self.kind == "deterministic-one":
            return np.exp(1j * w)
        if self.kind == "two-point":
            a, b, p = self.params
            return p * np.exp(1j * a * w) + (1.0 - p) * np.exp(1j * b * w)
        if self.kind == "uniform-interval":
            lo, hi = self.params
            # sinc form is exact and finite at w = 0
            return np.exp(0.5j * (lo + hi) * w) * np.sinc(w * (hi - lo) / (2.0 * np.pi))
        mu, sd = self.params
        return np.exp(1j * mu * w - 0.5 * sd * sd * w * w)


def parse_impulse(text: str) -> ImpulseSpec:
    """Parse 'one', 'two-point:a=..,b=..,p=..', 'uniform:lo=..,hi=..', 'normal:mu=..,sd=..'."""
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    kv = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            kv[key.strip()] = float(val)
    try:
        if head in ("one", "deterministic-one"):
            return ImpulseSpec()
        if head == "two-point":
            return ImpulseSpec("two-point", (kv["a"], kv["b"], kv["p"]))
        if head in ("uniform", "uniform-interval"):
            return ImpulseSpec("uniform-interval", (kv["lo"], kv["hi"]))
        if head == "normal":
            return ImpulseSpec("normal", (kv["mu"], kv["sd"]))
    except KeyError as exc:
        raise ParameterError(f"impulse spec {text!r} missing key {exc}") from None
    raise ParameterError(f"unknown impulse spec {text!r}")


@dataclass(frozen=True, eq=False)
class PointConfiguration:
    """One realization of the marked point process on a window."""

    window: tuple[float, float]
    points: np.ndarray      # sorted ascending, all inside window
    impulses: np.ndarray    # marks aligned with points
    intensity: float
    impulse_spec: ImpulseSpec
    seed_info: tuple        # (master_seed, derivation path) or 'merged' tuple

    def __post_init__(self):
        if len(self.points) != len(self.impulses):
            raise ParameterError("points and impulses must align")

    @property
    def count(self) -> int:
        return len(self.points)


class ConditionalSample(NamedTuple):
    config: PointConfiguration
    rejected: int


def _validate(lam: float, window: tuple[float, float]) -> float:
    if lam < 0.0:
        raise ParameterError(f"intensity must be nonnegative, got {lam}")
    w0, w1 = window
    if w1 < w0:
        raise ParameterError(f"window is inverted: {window}")
    return (w1 - w0) * lam


def sample_ppp(
    lam: float,
    window: tuple[float, float],
    impulses: ImpulseSpec,
    strm: Stream,
) -> PointConfiguration:
    """Draw one marked Poisson configuration on the window.

    Count first, then times i.i.d. uniform given the count, then marks.
    Deterministic function of the stream identity.
    """
    mu = _validate(lam, window)
    rng = strm.generator()
    n = int(rng.poisson(mu))
    pts = np.sort(rng.uniform(window[0], window[1], n))
    marks = impulses.sample(rng, n)
    return PointConfiguration(
        window=(float(window[0]), float(window[1])),
        points=pts,
        impulses=marks,
        intensity=float(lam),
        impulse_spec=impulses,
        seed_info=(strm.master_seed, strm.path),
    )


def conditional_acceptance(lam: float, window: tuple[float, float], k0: int) -> float:
    """P(count >= k0) for the unconditioned draw."""
    mu = _validate(lam, window)
    return float(stats.poisson.sf(k0 - 1, mu))


def sample_conditional(
    lam: float,
    window: tuple[float, float],
    k0: int,
    impulses: ImpulseSpec,
    strm: Stream,
) -> ConditionalSample:
    """Rejection sample the configuration conditioned on count >= k0.

    Only counts are rejected; times and marks are drawn once the count is
    accepted, which leaves the conditional law intact.  Refuses to run when
    the acceptance probability drops below MIN_ACCEPTANCE.
    """
    if k0 < 0:
        raise ParameterError(f"k0 must be nonnegative, got {k0}")
    mu = _validate(lam, window)
    acc = conditional_acceptance(lam, window, k0)
    if acc < MIN_ACCEPTANCE:
        raise InfeasibleConditioningError(
            f"P(count >= {k0}) = {acc:.3e} below {MIN_ACCEPTANCE:.0e}", acc
        )
    rng = strm.generator()
    rejected = 0
    while True:
        n = int(rng.poisson(mu))
        if n >= k0:
            break
        rejected += 1
    pts = np.sort(rng.uniform(window[0], window[1], n))
    marks = impulses.sample(rng, n)
    config = PointConfiguration(
        window=(float(window[0]), float(window[1])),
        points=pts,
        impulses=marks,
        intensity=float(lam),
        impulse_spec=impulses,
        seed_info=(strm.master_seed, strm.path, "cond", k0),
    )
    return ConditionalSample(config, rejected)


def merge_configs(first: PointConfiguration, second: PointConfiguration) -> PointConfiguration:
    """Superpose two independent configurations.

    Identical windows add intensities; otherwise the windows must not
    overlap (flanking constructions) and the intensities must match.
    """
    if first.impulse_spec != second.impulse_spec:
        raise ParameterError("cannot merge configurations with different impulse laws")
    same = first.window == second.window
    disjoint = (
        first.window[1] <= second.window[0] or second.window[1] <= first.window[0]
    )
    if same:
        lam = first.intensity + second.intensity
    elif disjoint:
        if first.intensity != second.intensity:
            raise ParameterError("disjoint merge needs equal intensities")
        lam = first.intensity
    else:
        raise ParameterError("windows must be identical or disjoint")
    window = (
        min(first.window[0], second.window[0]),
        max(first.window[1], second.window[1]),
    )
    pts = np.concatenate([first.points, second.points])
    marks = np.concatenate([first.impulses, second.impulses])
    order = np.argsort(pts, kind="stable")
    return PointConfiguration(
        window=window,
        points=pts[order],
        impulses=marks[order],
        intensity=lam,
        impulse_spec=first.impulse_spec,
        seed_info=("merged", first.seed_info, second.seed_info),
    )
