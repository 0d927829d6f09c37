"""Whitney decomposition and the constructive admissible covering.

For a finite non-empty F and scale a > 0, the target open set is

    O  = {x : 0 < d(x, F) <= a m(x)},
    O' = {z : 0 < d(z, F) < 2 a m(z)},

and the construction covers O by balls B(x_k, b d(x_k, F)) centered at points
x_k of Whitney cubes of O', with the measure sum of the inflated balls
B(x_k, c d(x_k, F)) controlled by gamma(O).

The complement of O' is represented by a finite certified point set C: it
always contains F, plus sweep-grid points and ray-bisection points z whose
membership d(z, F) >= 2 a m(z) is verified exactly in floating point.  All
cube distances are then exact distances to C, so the two-sided Whitney size
condition

    (delta/4) d(Q, C) <= diam(Q) <= delta d(Q, C)

holds exactly for every produced cube by the first-acceptance argument.
Since C is a subset of the true complement, d(., C) over-estimates the true
distance; the approximation converges as the sweep refines.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import spatial

from .measure import Ball, Point, gamma_ball, is_admissible, m_of_norms, region_measure_mc
from .geometry import GaussianCube, cube_containing, layer_index, scale_cube

_AMBIGUOUS_SAMPLE_LEVELS = (3, 5, 9, 17)


class CoveringError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# F handling and membership tests
# ---------------------------------------------------------------------------


def as_point_set(F) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(F, dtype=float))
    if pts.size == 0:
        raise CoveringError("F must be non-empty")
    if pts.ndim != 2:
        raise CoveringError("F must be a list of points")
    return pts


def dist_to_F(x: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from rows of x to the finite set F."""
    x2 = np.atleast_2d(x)
    d = np.linalg.norm(x2[:, None, :] - F[None, :, :], axis=2)
    out = d.min(axis=1)
    return out if np.asarray(x).ndim == 2 else out[0]


def in_O(x: np.ndarray, F: np.ndarray, a: float) -> np.ndarray:
    """Membership in O = {0 < d(x,F) <= a m(x)} (exact pointwise test)."""
    x2 = np.atleast_2d(x)
    d = dist_to_F(x2, F)
    m = m_of_norms(np.linalg.norm(x2, axis=1))
    out = (d > 0.0) & (d <= a * m)
    return out if np.asarray(x).ndim == 2 else bool(out[0])


def in_O_prime(x: np.ndarray, F: np.ndarray, a: float) -> np.ndarray:
    x2 = np.atleast_2d(x)
    d = dist_to_F(x2, F)
    m = m_of_norms(np.linalg.norm(x2, axis=1))
    out = (d > 0.0) & (d < 2.0 * a * m)
    return out if np.asarray(x).ndim == 2 else bool(out[0])


def bounding_box(F: np.ndarray, a: float) -> tuple[np.ndarray, np.ndarray]:
    """A box surely containing O' (d < 2a m <= 2a reaches at most 2a from F)."""
    pad = 2.0 * a + 1e-9
    return F.min(axis=0) - pad, F.max(axis=0) + pad


# ---------------------------------------------------------------------------
# certified complement approximation
# ---------------------------------------------------------------------------


@dataclass
class CoveringControls:
    """Resolution knobs; ``refine`` scales densities for stability studies."""

    sweep: int = 0  # 0 = dimension default
    rays: int = 0
    max_depth: int = 0
    o_samples: int = 10_000
    mc_samples: int = 200_000
    refine: int = 1
    seed: int = 0

    def resolved(self, n: int) -> "CoveringControls":
        sweep = self.sweep or {1: 2048, 2: 160, 3: 40}[n]
        rays = self.rays or {1: 2, 2: 96, 3: 192}[n]
        depth = self.max_depth or {1: 22, 2: 12, 3: 8}[n]
        return CoveringControls(
            sweep=sweep * self.refine,
            rays=rays * self.refine,
            max_depth=depth + (self.refine - 1),
            o_samples=self.o_samples * self.refine,
            mc_samples=self.mc_samples * self.refine,
            refine=self.refine,
            seed=self.seed,
        )


def _unit_directions(count: int, n: int, seed: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD12)))
    v = rng.normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _z_margin(x: np.ndarray, F: np.ndarray, a: float) -> np.ndarray:
    """d(x,F) - 2 a m(x); nonnegative certifies membership in the complement."""
    x2 = np.atleast_2d(x)
    return dist_to_F(x2, F) - 2.0 * a * m_of_norms(np.linalg.norm(x2, axis=1))


def complement_points(F: np.ndarray, a: float, controls: CoveringControls) -> np.ndarray:
    """Finite certified subset of the complement of O'.

    Contains F itself, sweep-grid points on the outer region's boundary
    shell, and ray-bisection points from each F point (taking the bracket
    end whose membership test passes, so every returned point genuinely
    lies outside O').
    """
    n = F.shape[1]
    lo, hi = bounding_box(F, a)
    ctr = controls.resolved(n)
    pts = [F]

    # sweep grid: keep certified outer points adjacent to non-outer ones
    axes = [np.linspace(lo[i], hi[i], ctr.sweep) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    gridpts = np.stack([g.ravel() for g in mesh], axis=1)
    margin = _z_margin(gridpts, F, a).reshape([ctr.sweep] * n)
    outer = margin >= 0.0
    shell = np.zeros_like(outer)
    for ax in range(n):
        inner_slice = [slice(None)] * n
        for shift in (1, -1):
            rolled = np.roll(outer, shift, axis=ax)
            edge = outer & ~rolled
            # roll wraps around; the wrapped faces are genuine box edges, drop them
            inner_slice[ax] = 0 if shift == 1 else -1
            edge[tuple(inner_slice)] = False
            inner_slice[ax] = slice(None)
            shell |= edge
    pts.append(gridpts[shell.ravel()])

    # ray bisection from every F point
    dirs = _unit_directions(ctr.rays, n, ctr.seed)
    span = float(np.max(hi - lo))
    for f in F:
        for d in dirs:
            step = 0.05 * max(a, 0.25)
            t_lo, t_hi = 0.0, step
            found = False
            while t_hi <= 2.5 * span:
                if _z_margin(f + t_hi * d, F, a)[0] >= 0.0:
                    found = True
                    break
                t_lo, t_hi = t_hi, t_hi + step
            if not found:
                continue
            for _ in range(60):
                mid = 0.5 * (t_lo + t_hi)
                if _z_margin(f + mid * d, F, a)[0] >= 0.0:
                    t_hi = mid
                else:
                    t_lo = mid
            pts.append((f + t_hi * d)[None, :])

    return np.concatenate(pts, axis=0)


# ---------------------------------------------------------------------------
# Whitney cubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WhitneyCube:
    """Dyadic cube of side 2^(-j) at lattice position; j >= 0 (side <= 1)."""

    j: int
    lattice: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.lattice)

    @property
    def side(self) -> float:
        return 2.0**-self.j

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lattice, dtype=float) * self.side

    @property
    def hi(self) -> np.ndarray:
        return (np.asarray(self.lattice, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lattice, dtype=float) + 0.5) * self.side

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(self.n)

    def children(self):
        base = tuple(2 * v for v in self.lattice)
        n = self.n
        for mask in range(1 << n):
            off = tuple((mask >> i) & 1 for i in range(n))
            yield WhitneyCube(self.j + 1, tuple(base[i] + off[i] for i in range(n)))


def _box_dist(lo: np.ndarray, hi: np.ndarray, pts: np.ndarray) -> np.ndarray:
    d = np.maximum(np.maximum(lo[None, :] - pts, pts - hi[None, :]), 0.0)
    return np.linalg.norm(d, axis=1)


def _cube_dist_to_set(cube: WhitneyCube, tree: spatial.cKDTree, C: np.ndarray) -> float:
    center = cube.center
    dc, _ = tree.query(center)
    cand = tree.query_ball_point(center, dc + 0.5 * cube.diam + 1e-12)
    return float(np.min(_box_dist(cube.lo, cube.hi, C[cand])))


def _max_m_on_cube(cube: WhitneyCube) -> float:
    d0 = float(np.linalg.norm(np.maximum(np.maximum(cube.lo, -cube.hi), 0.0)))
    return 1.0 if d0 <= 1.0 else 1.0 / d0


def _find_O_point(cube: WhitneyCube, F: np.ndarray, a: float) -> np.ndarray | None:
    """Grid point of the cube lying in O, nearest the center; None if the cube
    is certified (or deemed, after refinement) to miss O."""
    lo, hi = cube.lo, cube.hi
    lip = 1.0 + a  # Lipschitz bound for a*m(x) - d(x,F)
    for lev in _AMBIGUOUS_SAMPLE_LEVELS:
        axes = [np.linspace(lo[i], hi[i], lev) for i in range(cube.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        d = dist_to_F(pts, F)
        slack = a * m_of_norms(np.linalg.norm(pts, axis=1)) - d
        ok = (d > 0.0) & (slack >= 0.0)
        if np.any(ok):
            cand = pts[ok]
            return cand[np.argmin(np.linalg.norm(cand - cube.center[None, :], axis=1))]
        spacing = (hi - lo).max() / (lev - 1)
        if float(slack.max()) < -lip * spacing * math.sqrt(cube.n):
            return None  # certified empty
    return None  # unresolved after finest sampling; treated as not meeting O


def whitney_decompose(
    F,
    a: float,
    delta: float,
    controls: CoveringControls | None = None,
) -> tuple[list[WhitneyCube], dict]:
    """Whitney cubes of O' (w.r.t. the certified complement set) meeting O.

    Returns the kept cubes together with an info dict carrying, per cube,
    the complement distance and the selected O sample point, plus counters.
    Raises CoveringError when the depth cap is hit before the size condition
    can hold (delta too small for the configured resolution).
    """
    F = as_point_set(F)
    if not (0.0 < delta <= 0.5):
        raise CoveringError("delta must lie in (0, 1/2]")
    if a <= 0:
        raise CoveringError("a must be positive")
    n = F.shape[1]
    ctr = (controls or CoveringControls()).resolved(n)
    C = complement_points(F, a, ctr)
    tree = spatial.cKDTree(C)

    lo, hi = bounding_box(F, a)
    root_lo = np.floor(lo).astype(int)
    root_hi = np.ceil(hi).astype(int)
    ranges = [np.arange(root_lo[i], root_hi[i]) for i in range(n)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    level = np.stack([g.ravel() for g in mesh], axis=1).astype(np.int64)

    kept: list[WhitneyCube] = []
    dists: list[float] = []
    xks: list[np.ndarray] = []
    stats = {"processed": 0, "pruned": 0, "cap_discarded": 0, "f_collar_discarded": 0, "no_O_point": 0}
    sqrt_n = math.sqrt(n)
    j = 0
    while level.size:
        side = 2.0**-j
        diam = side * sqrt_n
        lo_a = level * side
        hi_a = lo_a + side
        centers = lo_a + 0.5 * side
        stats["processed"] += len(level)

        # exact distance to F (vectorized box distance against each F point)
        d = np.maximum(np.maximum(F[None, :, :] - hi_a[:, None, :], lo_a[:, None, :] - F[None, :, :]), 0.0)
        d_F = np.min(np.linalg.norm(d, axis=2), axis=1)
        # largest m over the cube closure: m at the point nearest the origin
        near0 = np.linalg.norm(np.maximum(np.maximum(lo_a, -hi_a), 0.0), axis=1)
        max_m = np.where(near0 <= 1.0, 1.0, 1.0 / np.maximum(near0, 1e-300))

        alive = d_F <= 2.0 * a * max_m
        stats["pruned"] += int(np.count_nonzero(~alive))

        # center distance to C bounds the exact cube distance within diam/2;
        # cubes with diam > delta * (center distance) can never be accepted
        dc = np.full(len(level), np.inf)
        if np.any(alive):
            dc[alive] = tree.query(centers[alive])[0]
        candidate = alive & (diam <= delta * dc)
        accepted = np.zeros(len(level), dtype=bool)
        for i in np.flatnonzero(candidate):
            cube = WhitneyCube(j, tuple(int(v) for v in level[i]))
            d_hat = _cube_dist_to_set(cube, tree, C)
            if diam > delta * d_hat:
                continue
            accepted[i] = True
            if d_F[i] > a * max_m[i]:
                stats["no_O_point"] += 1  # certified disjoint from O
                continue
            xk = _find_O_point(cube, F, a)
            if xk is None:
                stats["no_O_point"] += 1  # Whitney cube of O' \ O: discarded
                continue
            kept.append(cube)
            dists.append(d_hat)
            xks.append(xk)

        pending = alive & ~accepted
        if j >= ctr.max_depth:
            idx = np.flatnonzero(pending)
            harmless = d_F[idx] > a * max_m[idx]
            collar = d_F[idx] <= 2.0 * diam
            stats["cap_discarded"] += int(np.count_nonzero(harmless))
            # the refinement chain collapsing onto F points; the lost collar
            # has width <= 2 diam and is far below sampling scale
            stats["f_collar_discarded"] += int(np.count_nonzero(~harmless & collar))
            bad = idx[~harmless & ~collar]
            if bad.size:
                cube = WhitneyCube(j, tuple(int(v) for v in level[bad[0]]))
                raise CoveringError(
                    f"depth cap {ctr.max_depth} reached at cube {cube} before the "
                    f"size condition held (delta={delta} too small for this resolution)"
                )
            break
        children = 2 * level[pending]
        offs = np.stack(np.meshgrid(*[[0, 1]] * n, indexing="ij"), axis=-1).reshape(-1, n)
        level = (children[:, None, :] + offs[None, :, :]).reshape(-1, n)
        j += 1

    # first-acceptance guarantees the lower bound except possibly at roots
    for cube, d_hat in zip(kept, dists):
        if cube.diam < 0.25 * delta * d_hat - 1e-15:
            raise CoveringError(f"two-sided size condition violated at root cube {cube}")

    info = {"C": C, "distances": dists, "x_points": xks, "stats": stats, "controls": ctr}
    return kept, info


# ---------------------------------------------------------------------------
# the covering construction
# ---------------------------------------------------------------------------


@dataclass
class CoveringResult:
    centers: list[list[float]]
    distances: list[float]
    params: tuple[float, float, float]
    measure_sum: float
    target_measure: float
    coverage_fraction: float
    meta: dict = field(default_factory=dict)

    @property
    def measure_ratio(self) -> float:
        if self.target_measure <= 0:
            return math.inf if self.measure_sum > 0 else 0.0
        return self.measure_sum / self.target_measure

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "params": {"a": self.params[0], "b": self.params[1], "c": self.params[2]},
            "centers": self.centers,
            "distances": self.distances,
            "measure_sum": self.measure_sum,
            "target_measure": self.target_measure,
            "measure_ratio": self.measure_ratio,
            "coverage_fraction": self.coverage_fraction,
            "meta": self.meta,
        }


def _sample_O(F: np.ndarray, a: float, count: int, seed: int) -> np.ndarray:
    """Up to ``count`` uniform points of O inside the bounding box."""
    lo, hi = bounding_box(F, a)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x05A)))
    out = []
    got = 0
    for _ in range(200):
        draw = rng.uniform(lo, hi, size=(max(4 * count, 1000), F.shape[1]))
        keep = draw[in_O(draw, F, a)]
        if keep.size:
            out.append(keep)
            got += len(keep)
        if got >= count:
            break
    if not out:
        return np.empty((0, F.shape[1]))
    return np.concatenate(out, axis=0)[:count]


def cover_admissible(
    F,
    a: float,
    b: float,
    c: float,
    controls: CoveringControls | None = None,
) -> CoveringResult:
    """The covering construction: Whitney cubes of O', discarding those that
    miss O, with x_k the O sample point of each cube nearest its center.

    Records the sampled coverage of O by the balls B(x_k, b d(x_k, F))
    (property (i)) and the measure sum of the inflated balls against a Monte
    Carlo estimate of gamma(O) (property (ii)).
    """
    F = as_point_set(F)
    if min(a, b, c) <= 0:
        raise CoveringError("a, b, c must be positive")
    n = F.shape[1]
    ctr = (controls or CoveringControls()).resolved(n)
    delta = min(0.5, b)
    cubes, info = whitney_decompose(F, a, delta, controls)
    xks = np.array(info["x_points"]).reshape(len(cubes), n)
    dF = dist_to_F(xks, F) if len(cubes) else np.empty(0)

    measure_sum = 0.0
    for xk, dk in zip(xks, dF):
        est = gamma_ball(Ball(Point.of(xk), c * dk), tol=1e-7)
        measure_sum += est.value

    lo, hi = bounding_box(F, a)
    target = region_measure_mc(lo, hi, lambda P: in_O(P, F, a), ctr.mc_samples, seed=ctr.seed, tag="gammaO")

    samples = _sample_O(F, a, ctr.o_samples, ctr.seed)
    covered = 0
    if samples.size:
        radii = b * dF
        for i in range(0, len(samples), 1024):
            blk = samples[i : i + 1024]
            d = np.linalg.norm(blk[:, None, :] - xks[None, :, :], axis=2)
            covered += int(np.count_nonzero(np.any(d < radii[None, :], axis=1)))
    frac = covered / len(samples) if len(samples) else 1.0

    meta = {
        "cubes": len(cubes),
        "delta": delta,
        "stats": info["stats"],
        "o_samples": int(len(samples)),
        "gamma_O_error": target.error,
        "seed": ctr.seed,
        "refine": ctr.refine,
    }
    return CoveringResult(
        centers=[list(map(float, xk)) for xk in xks],
        distances=[float(v) for v in dF],
        params=(a, b, c),
        measure_sum=measure_sum,
        target_measure=target.value,
        coverage_fraction=frac,
        meta=meta,
    )


def check_claim_distance(F, a: float, samples: int, controls: CoveringControls | None = None) -> dict:
    """Sampled check of d(x, F) <= 3 max(1, a) d(x, complement of O') on O.

    The complement distance uses the certified point set, which can only
    over-estimate the true distance, so observed ratios under-estimate the
    true ones and the claimed bound must still hold.
    """
    F = as_point_set(F)
    ctr = (controls or CoveringControls()).resolved(F.shape[1])
    C = complement_points(F, a, ctr)
    tree = spatial.cKDTree(C)
    pts = _sample_O(F, a, samples, ctr.seed)
    if pts.size == 0:
        return {"samples": 0, "max_ratio": 0.0, "bound": 3.0 * max(1.0, a), "violations": 0, "vacuous": True}
    dF = dist_to_F(pts, F)
    dC, _ = tree.query(pts)
    ratio = dF / np.maximum(dC, 1e-300)
    bound = 3.0 * max(1.0, a)
    violations = int(np.count_nonzero(ratio > bound * (1.0 + 1e-9)))
    return {
        "samples": int(len(pts)),
        "max_ratio": float(ratio.max()),
        "bound": bound,
        "violations": violations,
        "vacuous": False,
    }


def selection_balls_admissible(cubes: Sequence[WhitneyCube], info: dict, a: float, delta: float) -> dict:
    """Check that every B(center(Q_k), diam(Q_k)) is admissible at the scale
    delta a (1 + a/4) implied by the construction (and at scale a when that
    dominates)."""
    scale = max(a, delta * a * (1.0 + 0.25 * a))
    bad = 0
    for cube in cubes:
        if not is_admissible(Ball(Point.of(cube.center), cube.diam), scale):
            bad += 1
    return {"scale": scale, "cubes": len(list(cubes)), "violations": bad}


# ---------------------------------------------------------------------------
# diagnostics: the O'' maximal-cube argument
# ---------------------------------------------------------------------------


def _beta_for(a: float) -> float:
    """Largest beta in (0, 1/3) with (2/3 + beta)(1 + beta a) < 1, by bisection."""
    f = lambda b: (2.0 / 3.0 + b) * (1.0 + b * a) - 1.0
    lo, hi = 0.0, 1.0 / 3.0
    if f(hi) < 0:
        return hi * (1.0 - 1e-12)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo


def _cube_subset_O(q: GaussianCube, F: np.ndarray, a: float, probes: int = 5) -> bool:
    axes = [np.linspace(q.lo[i], q.hi[i], probes) for i in range(q.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return bool(np.all(in_O(pts, F, a)))


def oprime_cover_diagnostic(F, a: float, samples: int = 2000, seed: int = 0, k_max: int = 12) -> dict:
    """Inspection-only report for the covering of O' \\ O by inflated maximal
    cubes: gamma(O' \\ O) <= sum gamma(M o Q_i) with M = 1 + 8 sqrt(n) (1+2a) / beta.

    No pass/fail: reports the inflation factor, the cube count, and the
    fraction of sampled O' \\ O points caught by the inflated cubes.
    """
    F = as_point_set(F)
    n = F.shape[1]
    beta = _beta_for(a)
    M = 1.0 + 8.0 * math.sqrt(n) / beta * (1.0 + 2.0 * a)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x0DD)))
    lo, hi = bounding_box(F, a)

    # maximal cubes inside O through sampled O'' points
    cubes: set[GaussianCube] = set()
    draws = rng.uniform(lo, hi, size=(samples * 4, n))
    d = dist_to_F(draws, F)
    m = m_of_norms(np.linalg.norm(draws, axis=1))
    opp = draws[(d > a * m / 3.0) & (d < 2.0 * a * m / 3.0)][:samples]
    for x in opp:
        found = None
        for k in range(0, k_max + 1):
            q = cube_containing(x, k)
            if _cube_subset_O(q, F, a):
                found = q
                break
        if found is not None:
            cubes.add(found)

    # sampled O' \ O points against the inflated cubes
    draws2 = rng.uniform(lo, hi, size=(samples * 4, n))
    d2 = dist_to_F(draws2, F)
    m2 = m_of_norms(np.linalg.norm(draws2, axis=1))
    mid = draws2[(d2 > a * m2) & (d2 < 2.0 * a * m2)][:samples]
    caught = 0
    boxes = [scale_cube(q, M) for q in cubes]
    for y in mid:
        for blo, bhi in boxes:
            if np.all(y >= blo) and np.all(y <= bhi):
                caught += 1
                break
    return {
        "beta": beta,
        "M": M,
        "maximal_cubes": len(cubes),
        "opp_samples": int(len(opp)),
        "mid_samples": int(len(mid)),
        "caught_fraction": (caught / len(mid)) if len(mid) else 1.0,
    }
