"""Gaussian measure primitives.

The standard Gaussian measure on R^n has density (2*pi)^(-n/2) * exp(-|x|^2/2)
with respect to Lebesgue measure.  Everything in this package is measured
against it.  The admissibility function m(x) = min(1, 1/|x|) caps the radius
at which balls still behave like balls of a doubling measure; a ball B(x, r)
is *admissible at scale a* when r <= a * m(x).

Measures of axis-aligned boxes are exact (products of 1-d normal CDF
differences).  Measures of balls are exact in dimension one, and in dimension
two or three are computed by adaptive quadrature of the smooth sectional
reduction, with a seeded stratified Monte Carlo fallback when the quadrature
budget is exceeded.  All Monte Carlo streams are deterministic functions of a
root seed and the call arguments, so concurrent calls reproduce bit-identical
results.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import erf, erfc

SQRT2 = math.sqrt(2.0)

# Dimension cap: desk-scale policy, higher n is out of budget for measures.
DIM_MAX = 3

DEFAULT_QUAD_TOL = 1e-8
DEFAULT_MC_TOL = 1e-4

# Adaptive quadrature controls for n >= 2 ball measures.
_QUAD_LIMIT = 200

# Monte Carlo fallback controls.
MC_SAMPLE_CAP = 400_000
_MC_STRATA_PER_AXIS = 8

_EPS = float(np.finfo(float).eps)


class MeasureError(ValueError):
    """Invalid geometric input to a measure computation."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    """A point of R^n, n >= 1, with finite coordinates."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise MeasureError("Point needs dimension n >= 1")
        if not all(math.isfinite(c) for c in self.coords):
            raise MeasureError(f"non-finite coordinates: {self.coords}")

    @classmethod
    def of(cls, x: "Point | Sequence[float] | float") -> "Point":
        if isinstance(x, Point):
            return x
        if np.isscalar(x):
            return cls((float(x),))
        return cls(tuple(float(c) for c in np.asarray(x, dtype=float).ravel()))

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True)
class Ball:
    """Euclidean ball B(center, radius), radius > 0."""

    center: Point
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", Point.of(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise MeasureError(f"ball radius must be positive, got {self.radius}")

    @property
    def n(self) -> int:
        return self.center.n


@dataclass(frozen=True)
class MeasureEstimate:
    """A gamma-measure value with an error bound and the method that made it.

    ``error`` is an absolute bound: rigorous for the exact and quadrature
    methods, a 3-sigma statistical bound for Monte Carlo.  When a requested
    tolerance could not be met within budget the estimate is still returned
    and ``error`` exceeds the tolerance; callers detect budget exhaustion by
    comparing the two.
    """

    value: float
    error: float
    method: str  # exact-1d | product-exact | quadrature | monte-carlo
    seed: int | None = None

    def __post_init__(self):
        if not (-1e-12 <= self.value <= 1 + 1e-12):
            raise MeasureError(f"measure value outside [0,1]: {self.value}")
        if self.error < 0:
            raise MeasureError("error bound must be nonnegative")

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "method": self.method,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# density and admissibility
# ---------------------------------------------------------------------------


def admissibility_m(x: Point | Sequence[float] | float) -> float:
    """min(1, 1/|x|); equals 1 at the origin."""
    r = Point.of(x).norm
    return 1.0 if r <= 1.0 else 1.0 / r


def m_of_norms(norms: np.ndarray) -> np.ndarray:
    """Vectorized admissibility function applied to an array of norms."""
    norms = np.asarray(norms, dtype=float)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, np.where(norms > 0, 1.0 / norms, np.inf))


def gaussian_density(x: Point | Sequence[float] | float) -> float:
    """Density of the standard Gaussian measure at x."""
    p = Point.of(x)
    return (2.0 * math.pi) ** (-p.n / 2.0) * math.exp(-0.5 * p.norm**2)


def is_admissible(b: Ball, a: float) -> bool:
    """True iff b.radius <= a * m(center); the inequality is closed."""
    if a <= 0:
        raise MeasureError("admissibility scale a must be positive")
    return b.radius <= a * admissibility_m(b.center)


# ---------------------------------------------------------------------------
# 1-d building blocks
# ---------------------------------------------------------------------------


def gamma_interval(lo, hi):
    """gamma_1([lo, hi]) = Phi(hi) - Phi(lo), stable in both tails.

    Accepts scalars or arrays (broadcast).  Uses erfc on intervals that do
    not straddle zero so far-out cells keep full relative precision.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.empty(np.broadcast(lo, hi).shape)
    lo_b, hi_b = np.broadcast_arrays(lo, hi)
    pos = lo_b >= 0
    neg = hi_b <= 0
    mid = ~(pos | neg)
    out[pos] = 0.5 * (erfc(lo_b[pos] / SQRT2) - erfc(hi_b[pos] / SQRT2))
    out[neg] = 0.5 * (erfc(-hi_b[neg] / SQRT2) - erfc(-lo_b[neg] / SQRT2))
    out[mid] = 0.5 * (erf(hi_b[mid] / SQRT2) - erf(lo_b[mid] / SQRT2))
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def gaussian_cdf(x):
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(-x / SQRT2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# box measures
# ---------------------------------------------------------------------------


def gamma_cube(lo: Point | Sequence[float], hi: Point | Sequence[float]) -> MeasureEstimate:
    """Exact gamma-measure of the axis-aligned box [lo, hi].

    The value is the product of per-coordinate normal CDF differences; the
    error field is an accumulated floating-point rounding bound.
    """
    lo_a = Point.of(lo).array
    hi_a = Point.of(hi).array
    if lo_a.shape != hi_a.shape:
        raise MeasureError("lo and hi must have the same dimension")
    if not np.all(lo_a < hi_a):
        raise MeasureError("box needs lo < hi componentwise")
    factors = gamma_interval(lo_a, hi_a)
    factors = np.atleast_1d(factors)
    value = float(np.prod(factors))
    # per-factor absolute rounding ~ 4 eps; first-order propagation through
    # the product, falling back to the worst single-factor bound at zero
    per = 4.0 * _EPS
    if np.all(factors > 0):
        err = value * float(np.sum(per / factors)) + per
    else:
        err = per
    return MeasureEstimate(min(value, 1.0), err, "product-exact")


# ---------------------------------------------------------------------------
# ball measures
# ---------------------------------------------------------------------------


def _interval_mass_scalar(lo: float, hi: float) -> float:
    if lo >= 0.0:
        return 0.5 * (math.erfc(lo / SQRT2) - math.erfc(hi / SQRT2))
    if hi <= 0.0:
        return 0.5 * (math.erfc(-hi / SQRT2) - math.erfc(-lo / SQRT2))
    return 0.5 * (math.erf(hi / SQRT2) - math.erf(lo / SQRT2))


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _ball_quad_2d(center: np.ndarray, radius: float, tol: float):
    c0, c1 = float(center[0]), float(center[1])

    def section(x0):
        g2 = radius * radius - (x0 - c0) ** 2
        if g2 <= 0.0:
            return 0.0
        g = math.sqrt(g2)
        width = _interval_mass_scalar(c1 - g, c1 + g)
        return _INV_SQRT_2PI * math.exp(-0.5 * x0 * x0) * width

    val, err = integrate.quad(
        section, c0 - radius, c0 + radius, epsabs=0.5 * tol, epsrel=1e-13, limit=_QUAD_LIMIT
    )
    return val, err


def _ball_quad_3d(center: np.ndarray, radius: float, tol: float):
    c0 = center[0]
    rest = center[1:]
    inner_tol = tol / max(4.0 * radius, 1.0)

    def section(x0):
        g = math.sqrt(max(radius**2 - (x0 - c0) ** 2, 0.0))
        if g == 0.0:
            return 0.0
        inner, _ = _ball_quad_2d(rest, g, inner_tol)
        return _INV_SQRT_2PI * math.exp(-0.5 * x0 * x0) * inner

    val, err = integrate.quad(
        section, c0 - radius, c0 + radius, epsabs=0.5 * tol, epsrel=1e-11, limit=_QUAD_LIMIT
    )
    return val, err + inner_tol


def _derived_seed(root_seed: int, *parts) -> np.random.Generator:
    """Deterministic per-call generator: root seed plus a digest of the call."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    sub = int.from_bytes(h.digest(), "big")
    return np.random.default_rng(np.random.SeedSequence((root_seed, sub)))


def region_measure_mc(
    lo: Sequence[float],
    hi: Sequence[float],
    contains: Callable[[np.ndarray], np.ndarray],
    samples: int,
    seed: int = 0,
    tag: str = "region",
) -> MeasureEstimate:
    """Stratified Monte Carlo estimate of gamma({x in box : contains(x)}).

    The bounding box [lo, hi] is split into equal strata per axis; within
    each stratum the integrand density * indicator is averaged over uniform
    draws.  Returns a 3-sigma error bound.
    """
    lo_a = np.asarray(lo, dtype=float)
    hi_a = np.asarray(hi, dtype=float)
    n = lo_a.size
    if n > DIM_MAX:
        raise MeasureError(f"dimension {n} exceeds configured cap {DIM_MAX}")
    s = max(2, int(round(_MC_STRATA_PER_AXIS ** (1.0 / n))))
    edges = [np.linspace(lo_a[i], hi_a[i], s + 1) for i in range(n)]
    grids = np.meshgrid(*[np.arange(s)] * n, indexing="ij")
    strata = np.stack([g.ravel() for g in grids], axis=1)
    n_strata = strata.shape[0]
    per = max(16, samples // n_strata)
    rng = _derived_seed(seed, tag, tuple(lo_a), tuple(hi_a), samples)

    total = 0.0
    var = 0.0
    norm_const = (2.0 * math.pi) ** (-n / 2.0)
    for idx in strata:
        slo = np.array([edges[i][idx[i]] for i in range(n)])
        shi = np.array([edges[i][idx[i] + 1] for i in range(n)])
        vol = float(np.prod(shi - slo))
        pts = rng.uniform(slo, shi, size=(per, n))
        f = norm_const * np.exp(-0.5 * np.sum(pts**2, axis=1))
        f = f * contains(pts).astype(float)
        total += vol * float(np.mean(f))
        var += vol**2 * float(np.var(f)) / per
    err = 3.0 * math.sqrt(var)
    return MeasureEstimate(min(max(total, 0.0), 1.0), err, "monte-carlo", seed=seed)


def ball_measure_mc(b: Ball, samples: int, seed: int = 0) -> MeasureEstimate:
    c = b.center.array
    r = b.radius

    def inside(pts):
        return np.sum((pts - c) ** 2, axis=1) <= r * r

    return region_measure_mc(c - r, c + r, inside, samples, seed=seed, tag="ball")


def gamma_ball(
    b: Ball,
    tol: float = DEFAULT_QUAD_TOL,
    seed: int = 0,
    quad_enabled: bool = True,
) -> MeasureEstimate:
    """gamma-measure of a Euclidean ball with error <= tol when achievable.

    n = 1 is exact (CDF difference).  n in {2, 3} integrates the smooth
    sectional reduction by adaptive quadrature; when that misses the
    tolerance (or is disabled) a stratified Monte Carlo fallback runs with a
    3-sigma bound.  If neither route achieves tol, the best estimate is
    returned with its achieved error, which then exceeds tol.
    """
    if tol <= 0:
        raise MeasureError("tol must be positive")
    n = b.n
    if n > DIM_MAX:
        raise MeasureError(f"dimension {n} exceeds configured cap {DIM_MAX}")
    c = b.center.array
    if n == 1:
        val = gamma_interval(c[0] - b.radius, c[0] + b.radius)
        return MeasureEstimate(min(float(val), 1.0), 4.0 * _EPS, "exact-1d")

    if quad_enabled:
        try:
            if n == 2:
                val, err = _ball_quad_2d(c, b.radius, tol)
            else:
                val, err = _ball_quad_3d(c, b.radius, tol)
            if err <= tol:
                return MeasureEstimate(min(max(val, 0.0), 1.0), err, "quadrature")
            best = MeasureEstimate(min(max(val, 0.0), 1.0), err, "quadrature")
        except Exception:
            best = None
    else:
        best = None

    # quadrature budget exceeded: stratified Monte Carlo with a hard sample cap
    mc = ball_measure_mc(b, MC_SAMPLE_CAP, seed=seed)
    if best is not None and best.error <= mc.error:
        return best
    return mc
