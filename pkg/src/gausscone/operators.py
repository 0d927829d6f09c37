"""Sublinear operators over the Gaussian measure.

Three operators, all built from admissible balls:

- ``maximal_M``: the admissible-ball maximal function, sup over radii
  r <= a m(x) of gamma-averages of |f| on B(x, r);
- ``maximal_T``: the non-tangential maximal function, sup over the cone
  {|y - x| < A t, t < a m(x)} of root-mean-square gamma-averages of
  e^(-t^2 L) u over B(y, A t);
- ``square_S``: the conical square function, the L^2(dgamma dt/t) norm of
  t grad e^(-t^2 L) u over the aperture-one cone, normalized per point by
  gamma(B(y, t)).

Fields live on uniform tensor grids; each cell carries its exact gamma-mass,
and ball averages weight cells by sampled overlap fractions (4 subsamples per
axis).  Averages use the same discretized masses in numerators and
denominators, so averaging a constant returns it exactly, including in the
far tail where cell masses underflow toward 1e-300.  For that reason every
ball convolution is direct (never FFT); balls much wider than the grid
spacing are handled by block-summing cells onto a coarser lattice first,
which leaves constants and homogeneity exact and only coarsens the overlap
geometry at the ball rim.

Sup-type discretizations are one-sided: they scan finite radius/cone node
sets (and, for wide discs, max-filter over inscribed coarse blocks), so
computed values never exceed the true suprema and never decrease when the
node set is refined to a superset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .measure import Point, gamma_interval, m_of_norms
from .semigroup import DEFAULT_ORDER, TestFunction, ou_field_grid, ou_grad_field_grid

DEFAULT_T_POINTS = 32
DEFAULT_RADII = 24
OVERLAP_SUBSAMPLES = 4

# direct-convolution radius caps (in grid units) per dimension; wider balls
# are pooled onto a 2^j-coarser lattice first
_RHO_CAP_CONV = {1: 1 << 20, 2: 24.0, 3: 10.0}
_RHO_CAP_DIL = {1: 1 << 20, 2: 16.0, 3: 8.0}


class OperatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


class Grid:
    """Uniform tensor grid on [-halfwidth, halfwidth]^n with spacing h.

    Nodes are cell centers; the cell of node x is [x - h/2, x + h/2]^n and
    carries its exact gamma-mass.
    """

    def __init__(self, n: int, halfwidth: float, h: float):
        if n < 1 or n > 3:
            raise OperatorError("grid dimension must be 1, 2, or 3")
        if h <= 0 or halfwidth <= 0:
            raise OperatorError("grid spacing and halfwidth must be positive")
        m = int(round(2 * halfwidth / h))
        axis = -halfwidth + h * np.arange(m + 1)
        self.n = n
        self.h = float(h)
        self.halfwidth = float(halfwidth)
        self.axes = tuple(axis.copy() for _ in range(n))
        self.shape = tuple(axis.size for _ in range(n))
        self.key = (n, float(halfwidth), float(h))
        self._axis_masses = gamma_interval(axis - h / 2.0, axis + h / 2.0)
        self._masses = None
        self._norms = None

    @property
    def cell_masses(self) -> np.ndarray:
        if self._masses is None:
            out = self._axis_masses
            for _ in range(self.n - 1):
                out = np.multiply.outer(out, self._axis_masses)
            self._masses = out
        return self._masses

    @property
    def node_norms(self) -> np.ndarray:
        if self._norms is None:
            sq = None
            for i in range(self.n):
                comp = self.axes[i] ** 2
                comp = comp.reshape([-1 if j == i else 1 for j in range(self.n)])
                sq = comp if sq is None else sq + comp
            self._norms = np.sqrt(sq)
        return self._norms

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def node_index(self, x: Sequence[float]) -> tuple[int, ...]:
        a = Point.of(x).array
        if a.size != self.n:
            raise OperatorError("point dimension does not match grid")
        idx = np.rint((a + self.halfwidth) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.shape[0]):
            raise OperatorError(f"point {a} outside grid box")
        return tuple(int(i) for i in idx)


@dataclass
class GridField:
    """Values sampled at grid nodes, optionally stacked along a time axis."""

    grid: Grid
    values: np.ndarray
    times: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape if self.times is None else (len(self.times),) + self.grid.shape
        if self.values.shape != expected:
            raise OperatorError(f"values shape {self.values.shape} != expected {expected}")
        if self.times is not None and np.any(np.diff(self.times) <= 0):
            raise OperatorError("time axis must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise OperatorError("field values must be finite")


def field_from_function(grid: Grid, fn: Callable[[np.ndarray], np.ndarray], meta: dict | None = None) -> GridField:
    """Sample a vectorized function of points (N, n) -> (N,) at the grid nodes."""
    vals = np.asarray(fn(grid.nodes()), dtype=float).reshape(grid.shape)
    return GridField(grid, vals, meta=meta or {})


@dataclass(frozen=True)
class OperatorParams:
    A: float
    a: float
    epsilon: float = 0.0
    flavor: str = "standard"

    def __post_init__(self):
        if self.A <= 0 or self.a <= 0:
            raise OperatorError("A and a must be positive")
        if self.epsilon < 0:
            raise OperatorError("epsilon must be nonnegative")
        if self.flavor not in ("standard", "tilde"):
            raise OperatorError(f"unknown flavor {self.flavor!r}")


# ---------------------------------------------------------------------------
# disc kernels, pooling, and direct convolution
# ---------------------------------------------------------------------------

_kernel_cache: dict[tuple, np.ndarray] = {}


def _ball_kernel(rho: float, n: int) -> np.ndarray:
    """Overlap-fraction kernel for a ball of radius rho (in units of h).

    Entry at integer offset D is the fraction of the 4^n subsample points of
    the unit cell at D lying strictly inside the ball centered at offset 0.
    """
    key = (round(rho, 12), n)
    ker = _kernel_cache.get(key)
    if ker is not None:
        return ker
    K = int(math.ceil(rho + 0.5))
    offs = np.arange(-K, K + 1, dtype=float)
    subs = (np.arange(OVERLAP_SUBSAMPLES) + 0.5) / OVERLAP_SUBSAMPLES - 0.5
    ax = offs[:, None] + subs[None, :]  # (2K+1, subs) positions per axis
    dist_sq = None
    for i in range(n):
        shape = [1] * (2 * n)
        shape[2 * i] = ax.shape[0]
        shape[2 * i + 1] = ax.shape[1]
        comp = (ax**2).reshape(shape)
        dist_sq = comp if dist_sq is None else dist_sq + comp
    inside = dist_sq < rho * rho
    ker = inside.mean(axis=tuple(range(1, 2 * n, 2)))
    if len(_kernel_cache) > 512:
        _kernel_cache.clear()
    _kernel_cache[key] = ker
    return ker


def _pool_level(rho: float, n: int, cap: float) -> int:
    j = 0
    while rho / (1 << j) > cap:
        j += 1
    return j


def _pool(arr: np.ndarray, j: int, op: str) -> np.ndarray:
    """Block-reduce by 2^j per axis ('sum' pads with 0, 'max' with -inf)."""
    if j == 0:
        return arr
    b = 1 << j
    pad = [(0, (-s) % b) for s in arr.shape]
    fill = 0.0 if op == "sum" else -np.inf
    arr = np.pad(arr, pad, constant_values=fill)
    for ax in range(arr.ndim):
        shape = arr.shape[:ax] + (arr.shape[ax] // b, b) + arr.shape[ax + 1 :]
        arr = arr.reshape(shape)
        arr = arr.sum(axis=ax + 1) if op == "sum" else arr.max(axis=ax + 1)
    return arr


def _unpool(arr: np.ndarray, j: int, shape: tuple[int, ...]) -> np.ndarray:
    if j == 0:
        return arr
    for ax in range(arr.ndim):
        arr = np.repeat(arr, 1 << j, axis=ax)
    return arr[tuple(slice(0, s) for s in shape)]


def _disc_conv(arr: np.ndarray, rho: float, n: int) -> np.ndarray:
    """Direct convolution with the disc overlap kernel (exact arithmetic)."""
    return ndimage.convolve(arr, _ball_kernel(rho, n), mode="constant", cval=0.0)


_den_cache: dict[tuple, np.ndarray] = {}


def _ball_mass_field(grid: Grid, r: float) -> np.ndarray:
    """Discretized gamma(B(y, r)) at every node, pooled for wide balls."""
    rho = r / grid.h
    j = _pool_level(rho, grid.n, _RHO_CAP_CONV[grid.n])
    key = (grid.key, round(rho, 12))
    out = _den_cache.get(key)
    if out is None:
        pooled = _pool(grid.cell_masses, j, "sum")
        out = _unpool(_disc_conv(pooled, rho / (1 << j), grid.n), j, grid.shape)
        if len(_den_cache) > 256:
            _den_cache.clear()
        _den_cache[key] = out
    return out


def _ball_average_field(grid: Grid, values: np.ndarray, r: float) -> np.ndarray:
    """Discretized gamma-average of ``values`` over B(y, r) at every node y."""
    rho = r / grid.h
    j = _pool_level(rho, grid.n, _RHO_CAP_CONV[grid.n])
    pooled = _pool(grid.cell_masses * values, j, "sum")
    num = _unpool(_disc_conv(pooled, rho / (1 << j), grid.n), j, grid.shape)
    den = _ball_mass_field(grid, r)
    return num / np.maximum(den, 1e-300)


def _disc_dilate(arr: np.ndarray, rho: float, n: int) -> np.ndarray:
    """sup of arr over the open disc |D| < rho around each node, one-sided.

    Wide discs max-pool onto a coarser lattice and dilate with the inscribed
    radius, so the scanned set never leaves the true disc.
    """
    j = _pool_level(rho, n, _RHO_CAP_DIL[n])
    if j == 0:
        fp = _disc_footprint(rho, n)
        return ndimage.maximum_filter(arr, footprint=fp, mode="constant", cval=-np.inf)
    rho_c = rho / (1 << j) - 2.0 * math.sqrt(n)
    pooled = _pool(arr, j, "max")
    fp = _disc_footprint(max(rho_c, 1.0), n)
    dil = ndimage.maximum_filter(pooled, footprint=fp, mode="constant", cval=-np.inf)
    out = _unpool(dil, j, arr.shape)
    return np.maximum(out, arr)  # the vertex itself always counts


def _disc_footprint(rho: float, n: int) -> np.ndarray:
    K = max(int(math.ceil(rho)), 0)
    offs = np.arange(-K, K + 1)
    grids = np.meshgrid(*[offs] * n, indexing="ij")
    dist_sq = sum(g.astype(float) ** 2 for g in grids)
    fp = dist_sq < rho * rho
    fp[(K,) * n] = True  # y = x always belongs to the open cone
    return fp


def _overlap_weights_at(grid: Grid, x: np.ndarray, r: float) -> tuple[tuple, np.ndarray]:
    """Cells near an arbitrary center x with their overlap fractions."""
    h = grid.h
    lo = np.floor((x - r + grid.halfwidth) / h - 0.5).astype(int)
    hi = np.ceil((x + r + grid.halfwidth) / h + 0.5).astype(int)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, np.asarray(grid.shape) - 1)
    if np.any(hi < lo):
        raise OperatorError("ball lies outside the grid box")
    slices = tuple(slice(int(lo[i]), int(hi[i]) + 1) for i in range(grid.n))
    subs = ((np.arange(OVERLAP_SUBSAMPLES) + 0.5) / OVERLAP_SUBSAMPLES - 0.5) * h
    dist_sq = None
    for i in range(grid.n):
        centers = grid.axes[i][slices[i]]
        pos = centers[:, None] + subs[None, :] - x[i]
        shape = [1] * (2 * grid.n)
        shape[2 * i] = pos.shape[0]
        shape[2 * i + 1] = pos.shape[1]
        comp = (pos**2).reshape(shape)
        dist_sq = comp if dist_sq is None else dist_sq + comp
    inside = dist_sq < r * r
    weights = inside.mean(axis=tuple(range(1, 2 * grid.n, 2)))
    return slices, weights


def _ball_average_at(grid: Grid, values: np.ndarray, x: np.ndarray, r: float, power: int = 1) -> float:
    slices, w = _overlap_weights_at(grid, x, r)
    mass = grid.cell_masses[slices] * w
    den = float(np.sum(mass))
    if den <= 0:
        return 0.0
    return float(np.sum(mass * values[slices] ** power)) / den


# ---------------------------------------------------------------------------
# admissible-ball maximal function
# ---------------------------------------------------------------------------


def _radius_set(h: float, a: float, count: int) -> np.ndarray:
    lo = h * 1.01
    if a <= lo:
        return np.array([])
    return np.geomspace(lo, a, count)


def ball_average_stack(grid: Grid, values: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """gamma-averages of ``values`` over B(., r) for each r; shape (n_r, *grid)."""
    return np.stack([_ball_average_field(grid, values, r) for r in radii])


def maximal_M_field(f: GridField, a: float, radii_count: int = DEFAULT_RADII) -> GridField:
    """M* f on the whole grid: sup over the admissible log radius set.

    Nodes whose admissible radius cap a m(x) falls below the resolvable
    radius floor are flagged and carry |f(x)|.
    """
    if f.times is not None:
        raise OperatorError("maximal function expects a spatial field")
    grid = f.grid
    absf = np.abs(f.values)
    radii = _radius_set(grid.h, a, radii_count)
    cap = a * m_of_norms(grid.node_norms)
    out = np.full(grid.shape, -np.inf)
    for r in radii:
        avg = _ball_average_field(grid, absf, r)
        mask = r <= cap
        out = np.where(mask, np.maximum(out, avg), out)
    flagged = ~np.isfinite(out)
    out[flagged] = absf[flagged]
    meta = dict(f.meta)
    meta.update({"operator": "M*", "a": a, "radii": len(radii), "flagged": int(flagged.sum())})
    return GridField(grid, out, meta=meta)


def maximal_M(f: GridField, a: float, x: Sequence[float], radii_count: int = DEFAULT_RADII) -> float:
    """M* f at one point: sup of ball averages over the admissible radius set.

    Falls back to |f(x)| when no radius in (h, a m(x)] is resolvable.
    """
    if a <= 0:
        raise OperatorError("a must be positive")
    grid = f.grid
    xa = Point.of(x).array
    idx = grid.node_index(xa)  # raises if outside the box
    cap = a * float(m_of_norms(np.linalg.norm(xa)))
    radii = _radius_set(grid.h, a, radii_count)
    radii = radii[radii <= cap]
    absf = np.abs(f.values)
    if radii.size == 0:
        return float(absf[idx])
    return max(_ball_average_at(grid, absf, xa, r) for r in radii)


# ---------------------------------------------------------------------------
# heat-field cache
# ---------------------------------------------------------------------------

_heat_cache: dict[tuple, np.ndarray] = {}


def _heat_values(u: TestFunction, t: float, grid: Grid, order: int) -> np.ndarray:
    """e^(-t^2 L) u at the grid nodes."""
    key = (u.key, round(t, 15), grid.key, order, "val")
    out = _heat_cache.get(key)
    if out is None:
        out = ou_field_grid(u, t * t, grid.axes, order)
        if len(_heat_cache) > 192:
            _heat_cache.clear()
        _heat_cache[key] = out
    return out


def _heat_gradsq(u: TestFunction, t: float, grid: Grid, order: int) -> np.ndarray:
    """|grad e^(-t^2 L) u|^2 at the grid nodes."""
    key = (u.key, round(t, 15), grid.key, order, "gradsq")
    out = _heat_cache.get(key)
    if out is None:
        g = ou_grad_field_grid(u, t * t, grid.axes, order)
        out = np.sum(g * g, axis=-1)
        if len(_heat_cache) > 192:
            _heat_cache.clear()
        _heat_cache[key] = out
    return out


def clear_caches():
    _heat_cache.clear()
    _den_cache.clear()
    _kernel_cache.clear()


def _t_grid(t_lo: float, t_hi: float, n_t: int) -> np.ndarray:
    if t_hi <= t_lo:
        return np.array([])
    return np.geomspace(t_lo, t_hi, n_t)


# ---------------------------------------------------------------------------
# non-tangential maximal function T*
# ---------------------------------------------------------------------------


def maximal_T_field(
    u: TestFunction,
    params: OperatorParams,
    grid: Grid,
    n_t: int = DEFAULT_T_POINTS,
    order: int = DEFAULT_ORDER,
) -> GridField:
    """T* u on the whole grid (standard or tilde flavor).

    For each t in a log-spaced grid the RMS ball average over B(y, A t) is a
    convolution shared by all vertices; the vertex sup is a disc max filter.
    Unresolvable cones fall back to |u(x)|.
    """
    A, a = params.A, params.a
    ts = _t_grid(grid.h / 4.0, a, n_t)
    node_m = m_of_norms(grid.node_norms)
    out = np.full(grid.shape, -np.inf)
    for t in ts:
        v = _heat_values(u, t, grid, order)
        ba = np.sqrt(_ball_average_field(grid, v * v, A * t))
        if params.flavor == "tilde":
            ba = np.where(t < a * node_m, ba, -np.inf)
        dil = _disc_dilate(ba, A * t / grid.h, grid.n)
        if params.flavor == "standard":
            dil = np.where(t < a * node_m, dil, -np.inf)
        out = np.maximum(out, dil)
    flagged = ~np.isfinite(out)
    if np.any(flagged):
        uvals = np.abs(u.value(grid.nodes()).reshape(grid.shape))
        out[flagged] = uvals[flagged]
    meta = {
        "operator": "T*" if params.flavor == "standard" else "tildeT*",
        "A": A,
        "a": a,
        "n_t": n_t,
        "order": order,
        "flagged": int(flagged.sum()),
    }
    return GridField(grid, out, meta=meta)


def maximal_T(
    u: TestFunction,
    params: OperatorParams,
    x: Sequence[float],
    grid: Grid,
    n_t: int = DEFAULT_T_POINTS,
    order: int = DEFAULT_ORDER,
) -> float:
    """T* u at one vertex: sup over the discretized cone.

    The t axis is log-spaced in (h/4, a m(x)) (standard flavor; the tilde
    flavor scans up to a and filters per sample point); y ranges over x
    itself plus grid nodes within A t.  Returns |u(x)| when the cone is
    empty at this resolution.
    """
    A, a = params.A, params.a
    xa = Point.of(x).array
    mx = float(m_of_norms(np.linalg.norm(xa)))
    t_hi = a * mx if params.flavor == "standard" else a
    ts = _t_grid(grid.h / 4.0, t_hi * (1.0 - 1e-12), n_t)
    best = -np.inf
    nodes_flat = grid.nodes()
    for t in ts:
        v = _heat_values(u, t, grid, order)
        d = np.linalg.norm(nodes_flat - xa[None, :], axis=1)
        cand = nodes_flat[d < A * t]
        cand = np.concatenate([xa[None, :], cand], axis=0)
        for y in cand:
            if params.flavor == "tilde" and t >= a * float(m_of_norms(np.linalg.norm(y))):
                continue
            rms = math.sqrt(max(_ball_average_at(grid, v, y, A * t, power=2), 0.0))
            best = max(best, rms)
    if not np.isfinite(best):
        return float(abs(u.value(xa[None, :])[0]))
    return float(best)


# ---------------------------------------------------------------------------
# conical square function S
# ---------------------------------------------------------------------------


def _log_trapezoid_weights(ts: np.ndarray) -> np.ndarray:
    """Weights for int f(t) dt/t on a log-spaced grid (trapezoid in ln t)."""
    if ts.size == 1:
        return np.array([1.0])
    dln = math.log(ts[1] / ts[0])
    w = np.full(ts.size, dln)
    w[0] = w[-1] = dln / 2.0
    return w


def square_S_field(
    u: TestFunction,
    a: float,
    epsilon: float = 0.0,
    grid: Grid | None = None,
    n_t: int = DEFAULT_T_POINTS,
    order: int = DEFAULT_ORDER,
    flavor: str = "standard",
) -> GridField:
    """S_a u (or the tilde variant) on the whole grid.

    The cone integral is a sum over the log t grid of disc convolutions of
    mass * |t grad e^(-t^2 L)u|^2 / gamma_disc(B(y, t)); the epsilon
    truncation and the height cap mask t nodes, so refinements with nested
    t grids and growing epsilon behave monotonically.
    """
    if grid is None:
        raise OperatorError("square_S_field needs a grid")
    node_m = m_of_norms(grid.node_norms)
    ts = _t_grid(grid.h / 4.0, a, n_t)
    if ts.size == 0:
        return GridField(grid, np.zeros(grid.shape), meta={"operator": "S", "a": a})
    w = _log_trapezoid_weights(ts)
    acc = np.zeros(grid.shape)
    for i, t in enumerate(ts):
        if t <= epsilon:
            continue
        gsq = _heat_gradsq(u, t, grid, order) * t * t
        den = _ball_mass_field(grid, t)
        K = grid.cell_masses * gsq / np.maximum(den, 1e-300)
        if flavor == "tilde":
            K = np.where(t < a * node_m, K, 0.0)
        rho = t / grid.h
        j = _pool_level(rho, grid.n, _RHO_CAP_CONV[grid.n])
        contrib = _unpool(_disc_conv(_pool(K, j, "sum"), rho / (1 << j), grid.n), j, grid.shape)
        if flavor == "standard":
            contrib = np.where(t < a * node_m, contrib, 0.0)
        acc += w[i] * contrib
    meta = {
        "operator": "S" if flavor == "standard" else "tildeS",
        "a": a,
        "epsilon": epsilon,
        "n_t": n_t,
        "order": order,
    }
    return GridField(grid, np.sqrt(np.maximum(acc, 0.0)), meta=meta)


def square_S(
    u: TestFunction,
    a: float,
    epsilon: float,
    x: Sequence[float],
    grid: Grid,
    n_t: int = DEFAULT_T_POINTS,
    order: int = DEFAULT_ORDER,
    flavor: str = "standard",
) -> float:
    """S^eps_a u at one vertex by direct cone quadrature."""
    xa = Point.of(x).array
    mx = float(m_of_norms(np.linalg.norm(xa)))
    ts = _t_grid(grid.h / 4.0, a, n_t)
    if ts.size == 0 or epsilon >= a * mx:
        return 0.0
    w = _log_trapezoid_weights(ts)
    node_m = m_of_norms(grid.node_norms)
    total = 0.0
    for i, t in enumerate(ts):
        if t <= epsilon:
            continue
        if flavor == "standard" and t >= a * mx:
            continue
        gsq = _heat_gradsq(u, t, grid, order) * t * t
        den = _ball_mass_field(grid, t)
        K = grid.cell_masses * gsq / np.maximum(den, 1e-300)
        if flavor == "tilde":
            K = np.where(t < a * node_m, K, 0.0)
        slices, ow = _overlap_weights_at(grid, xa, t)
        total += w[i] * float(np.sum(ow * K[slices]))
    return math.sqrt(total)


def tilde_variants(
    u: TestFunction,
    params: OperatorParams,
    x: Sequence[float],
    grid: Grid,
    n_t: int = DEFAULT_T_POINTS,
    order: int = DEFAULT_ORDER,
    operator: str = "S",
) -> float:
    """Cone operators with the flavor taken from ``params``.

    The standard flavor routes through exactly the same code paths as
    ``square_S`` / ``maximal_T``.
    """
    if operator == "S":
        return square_S(u, params.a, params.epsilon, x, grid, n_t, order, flavor=params.flavor)
    if operator == "T":
        return maximal_T(u, params, x, grid, n_t, order)
    raise OperatorError(f"unknown operator tag {operator!r}")


# ---------------------------------------------------------------------------
# distribution functions and norms
# ---------------------------------------------------------------------------


def distribution_function(g: GridField, sigma: float) -> float:
    """gamma({x : g(x) > sigma}) on the grid cells."""
    if sigma <= 0:
        raise OperatorError("sigma must be positive")
    if g.times is not None:
        raise OperatorError("distribution function expects a spatial field")
    return float(np.sum(g.grid.cell_masses[g.values > sigma]))


def l1_gamma_norm(g: GridField) -> float:
    """||g||_{L1(gamma)} = sum of |value| * cell mass."""
    if g.times is not None:
        raise OperatorError("norm expects a spatial field")
    return float(np.sum(np.abs(g.values) * g.grid.cell_masses))


def layer_cake_norm(g: GridField, num: int = 512) -> float:
    """||g||_{L1(gamma)} recovered from int_0^infty gamma({|g| > s}) ds.

    Integrates the distribution function over a geometric s-grid (trapezoid)
    plus the exact head term below the smallest s.
    """
    vals = np.abs(g.values)
    top = float(vals.max(initial=0.0))
    if top == 0.0:
        return 0.0
    s_lo = 1e-6 * top
    sgrid = np.geomspace(s_lo, 1.000001 * top, num)
    masses = g.grid.cell_masses
    dist = np.array([float(np.sum(masses[vals > s])) for s in sgrid])
    head = s_lo * float(np.sum(masses[vals > 0.0]))
    return head + float(np.trapezoid(dist, sgrid))


def sigma_grid(max_value: float, count: int = 64, floor: float = 1e-4) -> np.ndarray:
    """Geometric sigma grid spanning [floor, 1.2 * max value]."""
    top = max(1.2 * max_value, floor * 10.0)
    return np.geomspace(floor, top, count)
