"""The Ornstein-Uhlenbeck operator L = -Laplacian + x . grad and its semigroup.

The semigroup acts on a small algebra of closed-form test functions (smooth
compactly supported bumps, polynomials, products of probabilists' Hermite
polynomials, and finite sums) whose value, gradient, and Laplacian are exact.

Evaluation uses the probabilistic Mehler representation

    e^(-tL) u(x) = E[ u(e^(-t) x + sqrt(1 - e^(-2t)) Z) ],   Z standard normal,

by tensor Gauss-Hermite quadrature.  This form has no kernel singularity as
t -> 0 and is exact on polynomials up to the quadrature degree.  Spatial
derivatives commute through the average with a factor e^(-t) per order:
grad e^(-tL) u = e^(-t) e^(-tL) grad u, and similarly for second derivatives
with e^(-2t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite_e

from .measure import Point

DEFAULT_ORDER = 40
ORDER_CAP = 160

# chunk size (quadrature nodes x evaluation points) for field evaluation
_CHUNK = 2_000_000


class SemigroupError(ValueError):
    pass


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


class TestFunction:
    """Closed-form u with exact value/gradient/Laplacian evaluators.

    Evaluators are vectorized over the leading axes: value/laplacian map
    (..., n) -> (...), gradient maps (..., n) -> (..., n).  ``key`` is a
    stable hashable identity used for caching semigroup fields.
    """

    def __init__(self, kind, key, n, value, gradient, laplacian, degree=None, support=None):
        self.kind = kind
        self.key = key
        self.n = n
        self.value = value
        self.gradient = gradient
        self.laplacian = laplacian
        self.degree = degree  # polynomial degree when exact, else None
        self.support = support  # (center, radius) for compactly supported u

    def __repr__(self):
        return f"TestFunction({self.key})"


def bump(center: Sequence[float] | float, radius: float, height: float = 1.0) -> TestFunction:
    """Smooth bump h * exp(1 - 1/(1 - |x-c|^2/R^2)) on B(c, R), zero outside."""
    c = Point.of(center).array
    n = c.size
    if radius <= 0:
        raise SemigroupError("bump radius must be positive")
    R2 = radius * radius

    def _pieces(X):
        X = np.asarray(X, dtype=float)
        d = X - c
        s = np.sum(d * d, axis=-1) / R2
        mask = s < 1.0
        f = np.zeros_like(s)
        fp = np.zeros_like(s)
        fpp = np.zeros_like(s)
        if np.any(mask):
            w = 1.0 - s[mask]
            val = np.exp(1.0 - 1.0 / w)
            f[mask] = val
            fp[mask] = -val / w**2
            fpp[mask] = val / w**4 - 2.0 * val / w**3
        return d, s, f, fp, fpp

    def value(X):
        _, _, f, _, _ = _pieces(X)
        return height * f

    def gradient(X):
        d, _, _, fp, _ = _pieces(X)
        return height * fp[..., None] * (2.0 / R2) * d

    def laplacian(X):
        d, _, _, fp, fpp = _pieces(X)
        r2 = np.sum(d * d, axis=-1)
        return height * (fpp * 4.0 * r2 / R2**2 + fp * 2.0 * n / R2)

    key = ("bump", tuple(c.tolist()), float(radius), float(height))
    return TestFunction("bump", key, n, value, gradient, laplacian, support=(c, float(radius)))


def polynomial(terms: Sequence[tuple[float, Sequence[int]]], n: int) -> TestFunction:
    """Multivariate polynomial sum_k c_k * prod_i x_i^(e_ki)."""
    terms = [(float(c), tuple(int(e) for e in ex)) for c, ex in terms]
    for _, ex in terms:
        if len(ex) != n or any(e < 0 for e in ex):
            raise SemigroupError(f"bad exponent tuple {ex} for n={n}")
    degree = max((sum(ex) for _, ex in terms), default=0)

    def _mono(X, ex):
        out = np.ones(X.shape[:-1])
        for i, e in enumerate(ex):
            if e:
                out = out * X[..., i] ** e
        return out

    def value(X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1])
        for cf, ex in terms:
            out += cf * _mono(X, ex)
        return out

    def gradient(X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape)
        for cf, ex in terms:
            for i, e in enumerate(ex):
                if e:
                    dex = list(ex)
                    dex[i] -= 1
                    out[..., i] += cf * e * _mono(X, tuple(dex))
        return out

    def laplacian(X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1])
        for cf, ex in terms:
            for i, e in enumerate(ex):
                if e >= 2:
                    dex = list(ex)
                    dex[i] -= 2
                    out += cf * e * (e - 1) * _mono(X, tuple(dex))
        return out

    key = ("poly", tuple(terms), n)
    return TestFunction("polynomial", key, n, value, gradient, laplacian, degree=degree)


def _herme(k: int, x: np.ndarray) -> np.ndarray:
    coeffs = np.zeros(k + 1)
    coeffs[k] = 1.0
    return hermite_e.hermeval(x, coeffs)


def hermite(beta: Sequence[int] | int) -> TestFunction:
    """Product of probabilists' Hermite polynomials He_beta_i(x_i).

    Eigenfunction of L with eigenvalue |beta| = sum(beta).
    """
    bt = (int(beta),) if np.isscalar(beta) else tuple(int(b) for b in beta)
    if any(b < 0 for b in bt):
        raise SemigroupError("Hermite multi-index must be nonnegative")
    n = len(bt)

    def _axes(X):
        X = np.asarray(X, dtype=float)
        return [_herme(bt[i], X[..., i]) for i in range(n)]

    def value(X):
        axes = _axes(X)
        out = axes[0].copy()
        for a in axes[1:]:
            out *= a
        return out

    def gradient(X):
        X = np.asarray(X, dtype=float)
        axes = _axes(X)
        out = np.zeros(X.shape)
        for i in range(n):
            if bt[i] == 0:
                continue
            gi = bt[i] * _herme(bt[i] - 1, X[..., i])
            prod = gi
            for j in range(n):
                if j != i:
                    prod = prod * axes[j]
            out[..., i] = prod
        return out

    def laplacian(X):
        X = np.asarray(X, dtype=float)
        axes = _axes(X)
        out = np.zeros(X.shape[:-1])
        for i in range(n):
            if bt[i] < 2:
                continue
            hi = bt[i] * (bt[i] - 1) * _herme(bt[i] - 2, X[..., i])
            prod = hi
            for j in range(n):
                if j != i:
                    prod = prod * axes[j]
            out += prod
        return out

    key = ("hermite", bt)
    return TestFunction("hermite", key, n, value, gradient, laplacian, degree=sum(bt))


def fsum(parts: Sequence[tuple[float, TestFunction]]) -> TestFunction:
    """Finite linear combination of test functions."""
    parts = [(float(c), u) for c, u in parts]
    if not parts:
        raise SemigroupError("sum needs at least one part")
    n = parts[0][1].n
    if any(u.n != n for _, u in parts):
        raise SemigroupError("sum parts must share the dimension")

    def value(X):
        return sum(c * u.value(X) for c, u in parts)

    def gradient(X):
        return sum(c * u.gradient(X) for c, u in parts)

    def laplacian(X):
        return sum(c * u.laplacian(X) for c, u in parts)

    degs = [u.degree for _, u in parts]
    degree = max(degs) if all(d is not None for d in degs) else None
    key = ("sum", tuple((c, u.key) for c, u in parts))
    out = TestFunction("sum", key, n, value, gradient, laplacian, degree=degree)
    out._parts = list(parts)
    return out


def corpus_from_json(entries: Sequence[dict]) -> dict[str, TestFunction]:
    """Build the test-function corpus from JSON records {id, kind, ...}."""
    out: dict[str, TestFunction] = {}
    for e in entries:
        uid = e["id"]
        kind = e["kind"]
        if kind == "bump":
            out[uid] = bump(e["center"], e["radius"], e.get("height", 1.0))
        elif kind == "hermite":
            out[uid] = hermite(e["beta"])
        elif kind == "polynomial":
            out[uid] = polynomial([(c, ex) for c, ex in e["terms"]], e["n"])
        elif kind == "sum":
            inner = corpus_from_json(e["parts"])
            out[uid] = fsum([(p["coeff"], inner[p["id"]]) for p in e["parts"]])
        else:
            raise SemigroupError(f"unknown corpus kind {kind!r}")
    return out


# ---------------------------------------------------------------------------
# quadrature tables
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def gauss_hermite_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite rule: sum w_i f(z_i) ~ int f dgamma_1."""
    if order < 2:
        raise SemigroupError("quadrature order must be >= 2")
    z, w = hermite_e.hermegauss(order)
    return z, w / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=16)
def tensor_nodes(order: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensorized rule over R^n: nodes (order^n, n), weights (order^n,)."""
    z, w = gauss_hermite_nodes(order)
    grids = np.meshgrid(*[z] * n, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wg = np.meshgrid(*[w] * n, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for g in wg:
        weights *= g.ravel()
    return nodes, weights


@lru_cache(maxsize=16)
def _legendre_tensor(order: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule on [-1, 1]^n."""
    z, w = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*[z] * n, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wg = np.meshgrid(*[w] * n, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for g in wg:
        weights *= g.ravel()
    return nodes, weights


def _mehler_coeffs(t: float) -> tuple[float, float]:
    if t <= 0:
        raise SemigroupError("semigroup time must be positive")
    eta = math.exp(-t)
    sigma = math.sqrt(-math.expm1(-2.0 * t))
    return eta, sigma


# ---------------------------------------------------------------------------
# field evaluation (vectorized over evaluation points)
# ---------------------------------------------------------------------------

# Blur widths above this multiple of the support radius switch the Gaussian
# average from Hermite nodes to Legendre nodes fitted to the support; fixed
# Hermite nodes undersample a compactly supported non-analytic u once the
# blur is comparable to the support.  Below the switch the Hermite rule is
# exact to rounding; above it the Legendre order scales like R/sigma so the
# kernel stays resolved.
_SUPPORT_SWITCH = 1.0 / 32.0
_KER_NODES_PER_SIGMA = 10.0
_Q_CAP = {1: 2000, 2: 700, 3: 160}

_support_value_cache: dict[tuple, np.ndarray] = {}


def _support_order(order: int, R: float, sigma: float, n: int) -> int:
    q_needed = int(math.ceil(_KER_NODES_PER_SIGMA * R / sigma))
    return max(order, min(q_needed, _Q_CAP[n]))


def _expectation_gh(fn, eta, sigma, X, order, vec_dim=0):
    """E[fn(eta X + sigma Z)] over the tensor Hermite rule, chunked."""
    m, n = X.shape
    nodes, weights = tensor_nodes(order, n)
    shape = (m,) if vec_dim == 0 else (m, vec_dim)
    acc = np.zeros(shape)
    base = eta * X
    step = max(1, _CHUNK // max(m, 1))
    for j0 in range(0, nodes.shape[0], step):
        blk_nodes = nodes[j0 : j0 + step]
        blk_w = weights[j0 : j0 + step]
        pts = base[:, None, :] + sigma * blk_nodes[None, :, :]
        vals = fn(pts)
        if vec_dim == 0:
            acc += vals @ blk_w
        else:
            acc += np.einsum("mjk,j->mk", vals, blk_w)
    return acc


def _expectation_support(fn, cache_key, support, eta, sigma, X, order, vec_dim=0):
    """Same expectation, written as int fn(z) phi_sigma(z - eta x) dz over the
    support box and integrated with Legendre nodes fitted to it."""
    m, n = X.shape
    c, R = support
    order = _support_order(order, R, sigma, n)
    nodes01, w01 = _legendre_tensor(order, n)
    z = c[None, :] + R * nodes01
    key = (cache_key, order, vec_dim)
    cached = _support_value_cache.get(key)
    if cached is None:
        fvals = fn(z)
        wf = (w01 * R**n)[:, None] * fvals if vec_dim else (w01 * R**n) * fvals
        if len(_support_value_cache) > 256:
            _support_value_cache.clear()
        _support_value_cache[key] = wf
    else:
        wf = cached
    norm = (2.0 * math.pi) ** (-n / 2.0) / sigma**n
    shape = (m,) if vec_dim == 0 else (m, vec_dim)
    acc = np.zeros(shape)
    base = eta * X
    step = max(1, _CHUNK // max(m, 1))
    for j0 in range(0, z.shape[0], step):
        diff = (z[None, j0 : j0 + step, :] - base[:, None, :]) / sigma
        ker = norm * np.exp(-0.5 * np.sum(diff * diff, axis=-1))
        acc += ker @ wf[j0 : j0 + step]
    return acc


def _field(u: TestFunction, t: float, X: np.ndarray, order: int, which: str) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if u.kind == "sum":
        # linearity: dispatch each part through its own best rule
        parts = [(c, p) for c, p in _sum_parts(u)]
        out = None
        for c, p in parts:
            term = c * _field(p, t, X, order, which)
            out = term if out is None else out + term
        return out
    eta, sigma = _mehler_coeffs(t)
    pref = {"val": 1.0, "grad": eta, "lap": eta * eta}[which]
    fn = {"val": u.value, "grad": u.gradient, "lap": u.laplacian}[which]
    vec_dim = X.shape[1] if which == "grad" else 0
    if u.support is not None and sigma > _SUPPORT_SWITCH * u.support[1]:
        out = _expectation_support(fn, (u.key, which), u.support, eta, sigma, X, order, vec_dim)
    else:
        out = _expectation_gh(fn, eta, sigma, X, order, vec_dim)
    return pref * out


def _sum_parts(u: TestFunction):
    # reconstruct coefficient/part pairs from the key built by fsum
    return getattr(u, "_parts")


def ou_field(u: TestFunction, t: float, X: np.ndarray, order: int = DEFAULT_ORDER) -> np.ndarray:
    """e^(-tL) u at each row of X."""
    return _field(u, t, X, order, "val")


def ou_grad_field(u: TestFunction, t: float, X: np.ndarray, order: int = DEFAULT_ORDER) -> np.ndarray:
    """grad e^(-tL) u at each row of X, via the commutation rule."""
    return _field(u, t, X, order, "grad")


def ou_laplacian_field(u: TestFunction, t: float, X: np.ndarray, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Laplacian of e^(-tL) u, commutation applied twice."""
    return _field(u, t, X, order, "lap")


# ---------------------------------------------------------------------------
# tensor-grid field evaluation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _leggauss_1d(q: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(q)


def _double_factorial_moment(j: int) -> float:
    # E[Z^j] for standard normal Z
    if j % 2 == 1:
        return 0.0
    out = 1.0
    for v in range(j - 1, 1, -2):
        out *= v
    return out


def _poly_heat_axis(e: int, eta: float, sigma: float, xs: np.ndarray) -> np.ndarray:
    """E[(eta x + sigma Z)^e] as a function of x, exactly."""
    out = np.zeros_like(xs)
    for j in range(0, e + 1, 2):
        out += math.comb(e, j) * (eta * xs) ** (e - j) * sigma**j * _double_factorial_moment(j)
    return out


def _outer(parts: list[np.ndarray]) -> np.ndarray:
    out = parts[0]
    for p in parts[1:]:
        out = np.multiply.outer(out, p)
    return out


def _grid_field(u: TestFunction, t: float, axes: tuple[np.ndarray, ...], order: int, which: str) -> np.ndarray:
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    n = len(axes)
    shape = tuple(a.size for a in axes)
    eta, sigma = _mehler_coeffs(t)

    if u.kind == "sum":
        out = None
        for c, p in _sum_parts(u):
            term = c * _grid_field(p, t, axes, order, which)
            out = term if out is None else out + term
        return out

    if u.kind == "hermite":
        beta = u.key[1]
        decay = math.exp(-t * sum(beta))
        vals = [_herme(beta[i], axes[i]) for i in range(n)]
        if which == "val":
            return decay * _outer(vals)
        if which == "grad":
            out = np.zeros(shape + (n,))
            for i in range(n):
                if beta[i] == 0:
                    continue
                parts = [
                    beta[j] * _herme(beta[j] - 1, axes[j]) if j == i else vals[j]
                    for j in range(n)
                ]
                out[..., i] = _outer(parts)
            return eta * decay * out
        out = np.zeros(shape)
        for i in range(n):
            if beta[i] < 2:
                continue
            parts = [
                beta[j] * (beta[j] - 1) * _herme(beta[j] - 2, axes[j]) if j == i else vals[j]
                for j in range(n)
            ]
            out += _outer(parts)
        return eta * eta * decay * out

    if u.kind == "polynomial":
        terms = u.key[1]
        if which == "val":
            out = np.zeros(shape)
            for cf, ex in terms:
                out += cf * _outer([_poly_heat_axis(ex[i], eta, sigma, axes[i]) for i in range(n)])
            return out
        if which == "grad":
            out = np.zeros(shape + (n,))
            for cf, ex in terms:
                base = [_poly_heat_axis(ex[i], eta, sigma, axes[i]) for i in range(n)]
                for i in range(n):
                    if ex[i] == 0:
                        continue
                    parts = list(base)
                    parts[i] = eta * ex[i] * _poly_heat_axis(ex[i] - 1, eta, sigma, axes[i])
                    out[..., i] += cf * _outer(parts)
            return out
        out = np.zeros(shape)
        for cf, ex in terms:
            base = [_poly_heat_axis(ex[i], eta, sigma, axes[i]) for i in range(n)]
            for i in range(n):
                if ex[i] < 2:
                    continue
                parts = list(base)
                parts[i] = eta * eta * ex[i] * (ex[i] - 1) * _poly_heat_axis(ex[i] - 2, eta, sigma, axes[i])
                out += cf * _outer(parts)
        return out

    if u.support is None:
        raise SemigroupError(f"no grid evaluation path for kind {u.kind!r}")

    c, R = u.support
    pref = {"val": 1.0, "grad": eta, "lap": eta * eta}[which]
    fn = {"val": u.value, "grad": u.gradient, "lap": u.laplacian}[which]
    q_needed = int(math.ceil(_KER_NODES_PER_SIGMA * R / sigma))
    if q_needed <= _Q_CAP[n]:
        return pref * _grid_support_separable(fn, u.key, (c, R), eta, sigma, axes, max(order, q_needed), which)
    return pref * _grid_gh_masked(fn, (c, R), eta, sigma, axes, order, which)


def _grid_support_separable(fn, ukey, support, eta, sigma, axes, q, which):
    """Legendre-in-support quadrature, contracted one axis at a time.

    The Gaussian kernel factorizes over axes, so the full field on an
    m1 x ... x mn grid costs n kernel matrices plus one tensor contraction
    instead of an m * q^n sweep.
    """
    c, R = support
    n = len(axes)
    z1, w1 = _leggauss_1d(q)
    znodes = [c[i] + R * z1 for i in range(n)]
    key = (ukey, q, which, "grid")
    wU = _support_value_cache.get(key)
    if wU is None:
        grids = np.meshgrid(*znodes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        U = fn(pts)
        w_nd = _outer([w1 * R] * n).ravel() if n > 1 else w1 * R
        if which == "grad":
            wU = (w_nd[:, None] * U).reshape((q,) * n + (n,))
        else:
            wU = (w_nd * U).reshape((q,) * n)
        if len(_support_value_cache) > 256:
            _support_value_cache.clear()
        _support_value_cache[key] = wU
    norm1d = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    kers = []
    for i in range(n):
        diff = (znodes[i][None, :] - eta * axes[i][:, None]) / sigma
        kers.append(norm1d * np.exp(-0.5 * diff * diff))
    out = wU
    for i in range(n):
        # contract quadrature axis i against grid axis i, keeping order
        out = np.tensordot(kers[i], out, axes=(1, i))
        # tensordot puts the new grid axis first; rotate it into place
        out = np.moveaxis(out, 0, i)
    return out


def _grid_gh_masked(fn, support, eta, sigma, axes, order, which):
    """Hermite-rule evaluation restricted to the grid region that can see the
    support; everything else is exactly zero."""
    c, R = support
    n = len(axes)
    ximax = float(np.max(np.abs(gauss_hermite_nodes(order)[0])))
    reach = R + sigma * ximax
    idx = []
    for i in range(n):
        sel = np.flatnonzero(np.abs(eta * axes[i] - c[i]) <= reach)
        idx.append(sel)
    shape = tuple(a.size for a in axes)
    out = np.zeros(shape + ((n,) if which == "grad" else ()))
    if any(s.size == 0 for s in idx):
        return out
    sub = [axes[i][idx[i]] for i in range(n)]
    grids = np.meshgrid(*sub, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = _expectation_gh(fn, eta, sigma, pts, order, vec_dim=(n if which == "grad" else 0))
    region = np.ix_(*idx)
    if which == "grad":
        out[region] = vals.reshape(tuple(s.size for s in idx) + (n,))
    else:
        out[region] = vals.reshape(tuple(s.size for s in idx))
    return out


def ou_field_grid(u: TestFunction, t: float, axes: Sequence[np.ndarray], order: int = DEFAULT_ORDER) -> np.ndarray:
    """e^(-tL) u on a tensor grid; returns an array of shape (m1, ..., mn)."""
    return _grid_field(u, t, tuple(axes), order, "val")


def ou_grad_field_grid(u: TestFunction, t: float, axes: Sequence[np.ndarray], order: int = DEFAULT_ORDER) -> np.ndarray:
    """grad e^(-tL) u on a tensor grid; shape (m1, ..., mn, n)."""
    return _grid_field(u, t, tuple(axes), order, "grad")


# ---------------------------------------------------------------------------
# spec surface: single-point operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeatEvaluation:
    value: float
    gradient: tuple[float, ...]
    t: float
    x: Point
    quad_order: int
    est_error: float

    def __post_init__(self):
        if not math.isfinite(self.est_error):
            raise SemigroupError("non-finite quadrature error estimate")
        if len(self.gradient) != self.x.n:
            raise SemigroupError("gradient dimension mismatch")


def apply_L(u: TestFunction, x: Point | Sequence[float] | float) -> float:
    """L u(x) = -Laplacian u(x) + x . grad u(x) from closed forms."""
    xa = Point.of(x).array[None, :]
    return float(-u.laplacian(xa)[0] + xa[0] @ u.gradient(xa)[0])


def ou_apply(
    u: TestFunction,
    t: float,
    x: Point | Sequence[float] | float,
    quad_order: int = DEFAULT_ORDER,
    tol: float | None = None,
) -> HeatEvaluation:
    """e^(-tL) u(x) with an order-doubling error estimate.

    With ``tol`` given, the order escalates by doubling until the estimate
    meets it or the hard cap is reached; the best value and its achieved
    error are returned either way.
    """
    if quad_order < 2:
        raise SemigroupError("quad_order must be >= 2")
    xa = Point.of(x).array

    def _at(order):
        return float(ou_field(u, t, xa[None, :], order)[0])

    order = quad_order
    val = _at(order)
    prev = _at(max(2, order // 2))
    err = abs(val - prev)
    while tol is not None and err > tol and order < ORDER_CAP:
        order = min(2 * order, ORDER_CAP)
        new = _at(order)
        err = abs(new - val)
        val = new
    grad = ou_grad_field(u, t, xa[None, :], order)[0]
    return HeatEvaluation(val, tuple(grad.tolist()), t, Point.of(x), order, err)


def ou_gradient(
    u: TestFunction,
    t: float,
    x: Point | Sequence[float] | float,
    quad_order: int = DEFAULT_ORDER,
    method: str = "commutation",
) -> np.ndarray:
    """grad e^(-tL) u(x).

    ``commutation`` averages grad u; ``kernel`` differentiates the Gaussian
    average directly (Stein identity: eta/sigma E[Z u(eta x + sigma Z)]),
    which needs no derivative of u and serves as an independent cross-check.
    """
    xa = Point.of(x).array
    if method == "commutation":
        return ou_grad_field(u, t, xa[None, :], quad_order)[0]
    if method != "kernel":
        raise SemigroupError(f"unknown gradient method {method!r}")
    eta, sigma = _mehler_coeffs(t)
    n = xa.size
    if u.support is not None and sigma > _SUPPORT_SWITCH * u.support[1]:
        c, R = u.support
        nodes01, w01 = _legendre_tensor(_support_order(quad_order, R, sigma, n), n)
        z = c[None, :] + R * nodes01
        diff = (z - eta * xa[None, :]) / sigma
        ker = (2.0 * math.pi) ** (-n / 2.0) / sigma**n * np.exp(-0.5 * np.sum(diff**2, axis=1))
        w = w01 * R**n * u.value(z) * ker
        return (eta / sigma) * w @ diff
    nodes, weights = tensor_nodes(quad_order, n)
    pts = eta * xa[None, :] + sigma * nodes
    vals = u.value(pts)
    return (eta / sigma) * (weights * vals) @ nodes


def heat_residual(
    u: TestFunction,
    x: Point | Sequence[float] | float,
    t: float,
    quad_order: int = DEFAULT_ORDER,
) -> float:
    """|d/dt v + L v| at (x, t) for v = e^(-tL) u.

    The time derivative is a symmetric difference; L v combines the
    commutation forms for grad and Laplacian.  Zero in exact arithmetic.
    """
    xa = Point.of(x).array[None, :]
    h = 1e-4 * max(t, 0.01)
    if t - h <= 0:
        h = 0.5 * t
    vp = float(ou_field(u, t + h, xa, quad_order)[0])
    vm = float(ou_field(u, t - h, xa, quad_order)[0])
    dt = (vp - vm) / (2.0 * h)
    lap = float(ou_laplacian_field(u, t, xa, quad_order)[0])
    grad = ou_grad_field(u, t, xa, quad_order)[0]
    Lv = -lap + float(xa[0] @ grad)
    return abs(dt + Lv)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    order: int


def integrate_gamma(
    f: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float = 1e-10,
    order: int = DEFAULT_ORDER,
) -> QuadratureResult:
    """int f dgamma over R^n by Gauss-Hermite with order escalation.

    f must be vectorized over rows.  If the doubling estimate cannot reach
    tol before the order cap, the best value is returned with its achieved
    error (which then exceeds tol).
    """

    def _at(q):
        nodes, weights = tensor_nodes(q, n)
        return float(weights @ np.asarray(f(nodes), dtype=float))

    val = _at(order)
    err = math.inf
    while order < ORDER_CAP:
        order = min(2 * order, ORDER_CAP)
        new = _at(order)
        err = abs(new - val)
        val = new
        if err <= tol:
            break
    return QuadratureResult(val, err, order)
