"""Gaussian dyadic geometry.

R^n is sliced into layers L_0 = [-1,1)^n and, for l >= 1,
L_l = [-2^l, 2^l)^n \\ [-2^(l-1), 2^(l-1))^n (half-open boxes, left-closed).
Layer l hosts the dyadic cubes of side 2^(-(k+l)), so cube diameters stay
comparable to the admissibility function m on the layer:
diam(Q) = 2^(-k-l) * sqrt(n) <= 2^(-k) * n * m(center).

Cubes are stored by integer lattice indices, never floating corners, so
disjointness and coverage are exact.  The module also carries the scale
transfer constant c(a,b) = a(1+ab) and membership tests for the admissible
cones, in both the vertex-scale (t < a m(x)) and the tilde (t < a m(y))
flavors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .measure import Ball, Point, admissibility_m, m_of_norms

DEFAULT_ENUM_CAP = 4_000_000


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def layer_index(x: Point | Sequence[float] | float) -> int:
    """The unique l with x in L_l (half-open box membership)."""
    a = Point.of(x).array
    l = 0
    while True:
        w = float(2**l)
        if np.all(a >= -w) and np.all(a < w):
            return l
        l += 1
        if l > 1100:
            raise GeometryError("point outside representable layers")


def layer_box(l: int) -> tuple[np.ndarray, np.ndarray]:
    """Outer box of layer l as (lo, hi) scalars broadcastable to any n."""
    w = float(2**l)
    return -w, w


# ---------------------------------------------------------------------------
# cubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianCube:
    """Dyadic cube of side 2^(-(k+l)) contained in layer L_l.

    The cube is [lattice * side, (lattice+1) * side) componentwise.
    Containment in the layer is validated exactly in integer arithmetic.
    """

    k: int
    l: int
    lattice: tuple[int, ...]

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise GeometryError("cube needs k >= 0 and l >= 0")
        if len(self.lattice) < 1:
            raise GeometryError("lattice must have dimension >= 1")
        s = self.k + self.l
        outer = 2 ** (self.l + s)
        if not all(-outer <= li and li + 1 <= outer for li in self.lattice):
            raise GeometryError(f"cube {self} not inside layer box")
        if self.l >= 1:
            inner = 2 ** (self.l - 1 + s)
            if all(-inner <= li and li + 1 <= inner for li in self.lattice):
                raise GeometryError(f"cube {self} lies inside layer {self.l} inner box")

    @property
    def n(self) -> int:
        return len(self.lattice)

    @property
    def side(self) -> float:
        return 2.0 ** (-(self.k + self.l))

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

    def contains(self, x: Sequence[float]) -> bool:
        a = np.asarray(x, dtype=float)
        return bool(np.all(a >= self.lo) and np.all(a < self.hi))


def cubes_in_layer(k: int, l: int, n: int, cap: int = DEFAULT_ENUM_CAP) -> list[GaussianCube]:
    """All cubes of the layer-l slice at admissible scale k."""
    s = k + l
    outer = 2 ** (l + s)
    count = (2 * outer) ** n
    if l >= 1:
        count -= (2 ** (l - 1 + s + 1)) ** n
    if count > cap:
        raise GeometryError(f"layer enumeration of {count} cubes exceeds cap {cap}")
    axis = np.arange(-outer, outer)
    grids = np.meshgrid(*[axis] * n, indexing="ij")
    lat = np.stack([g.ravel() for g in grids], axis=1)
    if l >= 1:
        inner = 2 ** (l - 1 + s)
        inside = np.all((lat >= -inner) & (lat < inner), axis=1)
        lat = lat[~inside]
    return [GaussianCube(k, l, tuple(int(v) for v in row)) for row in lat]


def cube_partition(
    k: int, max_layer: int, n: int = 1, cap: int = DEFAULT_ENUM_CAP
) -> list[GaussianCube]:
    """Pairwise disjoint cubes covering [-2^max_layer, 2^max_layer)^n exactly."""
    if n < 1:
        raise GeometryError("n >= 1 required")
    out: list[GaussianCube] = []
    for l in range(max_layer + 1):
        out.extend(cubes_in_layer(k, l, n, cap=cap))
    return out


def cube_containing(x: Sequence[float], k: int) -> GaussianCube:
    """The unique cube of Delta_k^gamma containing x.

    Layer boxes are aligned with the dyadic grid of scale k+l, so the dyadic
    cube around x never straddles a layer boundary.
    """
    a = Point.of(x).array
    l = layer_index(a)
    s = k + l
    lat = tuple(int(math.floor(c * 2**s)) for c in a)
    return GaussianCube(k, l, lat)


def scale_cube(q: GaussianCube, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """The box alpha o Q: same center, alpha times the side length."""
    if alpha <= 0:
        raise GeometryError("alpha must be positive")
    half = 0.5 * alpha * q.side
    return q.center - half, q.center + half


def cubes_to_json(cubes: Iterable[GaussianCube]) -> list[list]:
    """Compact serialization: one [k, l, [lattice...]] record per cube."""
    return [[q.k, q.l, list(q.lattice)] for q in cubes]


def cubes_from_json(records: Iterable[Sequence]) -> list[GaussianCube]:
    return [GaussianCube(int(k), int(l), tuple(int(v) for v in lat)) for k, l, lat in records]


# ---------------------------------------------------------------------------
# transfer constants and cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferConstant:
    """c(a,b) = a(1+ab): if r <= a m(x) and |x-y| <= b r then r <= c(a,b) m(y)."""

    a: float
    b: float
    value: float

    def __post_init__(self):
        if abs(self.value - self.a * (1.0 + self.a * self.b)) > 1e-12 * max(1.0, self.value):
            raise GeometryError("transfer constant value inconsistent with a(1+ab)")


def transfer_constant(a: float, b: float) -> TransferConstant:
    if a <= 0 or b <= 0:
        raise GeometryError("transfer constant needs a, b > 0")
    return TransferConstant(a, b, a * (1.0 + a * b))


@dataclass(frozen=True)
class ConeParams:
    """Aperture A and admissibility scale a; flavor picks the height cap.

    standard: t < a m(vertex);  tilde: t < a m(y) at the sampled point.
    """

    A: float
    a: float
    flavor: str = "standard"

    def __post_init__(self):
        if self.A <= 0 or self.a <= 0:
            raise GeometryError("cone parameters must be positive")
        if self.flavor not in ("standard", "tilde"):
            raise GeometryError(f"unknown cone flavor {self.flavor!r}")


def cone_contains(x: Point | Sequence[float], params: ConeParams, y: Sequence[float], t: float) -> bool:
    """Strict membership of (y, t) in the admissible cone based at x."""
    if t <= 0:
        return False
    xa = Point.of(x).array
    ya = Point.of(y).array
    if float(np.linalg.norm(ya - xa)) >= params.A * t:
        return False
    anchor = xa if params.flavor == "standard" else ya
    return t < params.a * admissibility_m(Point.of(anchor))


# ---------------------------------------------------------------------------
# sampled lemma checks
# ---------------------------------------------------------------------------


def _sample_points(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Mix of Gaussian-typical and far-out centers so both m-branches fire."""
    half = count // 2
    a = rng.normal(size=(half, n))
    b = rng.uniform(-8.0, 8.0, size=(count - half, n))
    return np.concatenate([a, b], axis=0)


def _unit_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    v = rng.normal(size=(count, n))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def check_admsym(a: float, b: float, samples: int, n: int = 1, seed: int = 0) -> dict:
    """Sampled verification of the scale transfer lemma.

    Part (i): draws (x, r <= a m(x), y with |x-y| <= b r) and checks
    r <= c(a,b) m(y).  Part (ii): draws |x-y| <= b m(x) and checks
    m(x) <= (1+b) m(y) and m(y) <= (2+2b) m(x).  Returns max observed
    ratios and any violating triples (an implementation bug if non-empty).
    """
    if samples < 1:
        raise GeometryError("samples >= 1 required")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xAD5)))
    c_ab = transfer_constant(a, b).value
    slack = 1e-12

    x = _sample_points(rng, samples, n)
    mx = m_of_norms(np.linalg.norm(x, axis=1))
    r = rng.uniform(0.0, 1.0, samples) * a * mx
    y = x + _unit_vectors(rng, samples, n) * (rng.uniform(0.0, 1.0, samples) ** (1.0 / n) * b * r)[:, None]
    my = m_of_norms(np.linalg.norm(y, axis=1))
    ratio_i = r / my
    bad_i = ratio_i > c_ab * (1.0 + slack)

    y2 = x + _unit_vectors(rng, samples, n) * (rng.uniform(0.0, 1.0, samples) ** (1.0 / n) * b * mx)[:, None]
    my2 = m_of_norms(np.linalg.norm(y2, axis=1))
    ratio_fwd = mx / my2
    ratio_bwd = my2 / mx
    bad_ii = (ratio_fwd > (1.0 + b) * (1.0 + slack)) | (ratio_bwd > (2.0 + 2.0 * b) * (1.0 + slack))

    violations = int(np.count_nonzero(bad_i) + np.count_nonzero(bad_ii))
    report = {
        "a": a,
        "b": b,
        "n": n,
        "samples": samples,
        "c_ab": c_ab,
        "violations": violations,
        "max_ratio_i": float(np.max(ratio_i)),
        "max_ratio_ii_fwd": float(np.max(ratio_fwd)),
        "max_ratio_ii_bwd": float(np.max(ratio_bwd)),
    }
    if violations:
        idx = np.flatnonzero(bad_i)[:3]
        report["violating_triples"] = [
            {"x": x[i].tolist(), "r": float(r[i]), "y": y[i].tolist()} for i in idx
        ]
    return report


def check_cube_ball(a: float, samples: int, n: int = 1, seed: int = 0, max_layer: int = 4) -> dict:
    """Sampled check: admissible ball meeting a cube of Delta_0^gamma has
    r <= 2a(a+n) m(c_Q).

    Balls are drawn with centers across the layered box; for each ball every
    unit-scale cube it intersects is located exactly and tested.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xCBB)))
    bound = 2.0 * a * (a + n)
    worst = 0.0
    violations = 0
    checked = 0
    width = float(2**max_layer)
    x = _sample_points(rng, samples, n)
    x = np.clip(x, -width + 1e-9, width - 1e-9)
    mx = m_of_norms(np.linalg.norm(x, axis=1))
    r = rng.uniform(0.0, 1.0, samples) * a * mx
    for i in range(samples):
        if r[i] <= 0:
            continue
        # lattice range of unit-ish cubes whose closure meets the open ball
        for q in _cubes_near_point(x[i], r[i], max_layer):
            dist = _box_distance(q.lo, q.hi, x[i])
            if dist >= r[i]:
                continue
            checked += 1
            mc = admissibility_m(Point.of(q.center))
            ratio = r[i] / (bound * mc)
            worst = max(worst, ratio)
            if r[i] > bound * mc * (1.0 + 1e-12):
                violations += 1
    return {
        "a": a,
        "n": n,
        "samples": samples,
        "pairs_checked": checked,
        "violations": violations,
        "max_ratio_vs_bound": worst,
    }


def _sup_layer(sigma: float) -> int:
    """Layer whose annulus holds sup-norm sigma (boundary fuzz handled by callers)."""
    if sigma < 1.0:
        return 0
    return int(math.floor(math.log2(sigma))) + 1


def _cubes_near_point(x: np.ndarray, r: float, max_layer: int) -> list[GaussianCube]:
    """Cubes of Delta_0^gamma whose closure meets the box [x - r, x + r]."""
    n = x.size
    s_x = float(np.max(np.abs(x)))
    l_lo = max(_sup_layer(max(s_x - r, 0.0)) - 1, 0)
    l_hi = min(_sup_layer(s_x + r) + 1, max_layer)
    out = []
    for l in range(l_lo, l_hi + 1):
        side = 2.0**-l  # k = 0, so the cube scale is l
        outer = 2 ** (2 * l)
        lo_idx = np.maximum(np.floor((x - r) / side).astype(int), -outer)
        hi_idx = np.minimum(np.floor((x + r) / side).astype(int), outer - 1)
        if np.any(hi_idx < lo_idx):
            continue
        axes = [np.arange(lo_idx[i], hi_idx[i] + 1) for i in range(n)]
        lat = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        for row in lat:
            try:
                out.append(GaussianCube(0, l, tuple(int(v) for v in row)))
            except GeometryError:
                continue  # lattice cell not part of this layer's annulus
    return out


def _box_distance(lo: np.ndarray, hi: np.ndarray, x: np.ndarray) -> float:
    d = np.maximum(np.maximum(lo - x, x - hi), 0.0)
    return float(np.linalg.norm(d))


def check_cone_inclusion(A: float, a: float, samples: int, n: int = 1, seed: int = 0) -> dict:
    """Sampled check of the flavor comparison in both directions.

    standard cone at scale a sits inside the tilde cone at scale c(a,A), and
    the tilde cone at scale a sits inside the standard cone at scale c(a,A).
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC14)))
    c = transfer_constant(a, A).value
    std = ConeParams(A, a, "standard")
    std_big = ConeParams(A, c, "standard")
    til = ConeParams(A, a, "tilde")
    til_big = ConeParams(A, c, "tilde")
    bad = 0
    tested = 0
    x = _sample_points(rng, samples, n)
    mx = m_of_norms(np.linalg.norm(x, axis=1))
    t = rng.uniform(0.0, 1.0, samples) * a * np.maximum(mx, 1e-6)
    y = x + _unit_vectors(rng, samples, n) * (rng.uniform(0.0, 1.0, samples) * A * t)[:, None]
    my = m_of_norms(np.linalg.norm(y, axis=1))
    for i in range(samples):
        xi, yi, ti = x[i], y[i], float(t[i])
        if cone_contains(xi, std, yi, ti):
            tested += 1
            if not cone_contains(xi, til_big, yi, ti):
                bad += 1
        # resample t against m(y) for the tilde-to-standard direction
        tt = float(rng.uniform(0.0, 1.0)) * a * my[i]
        if tt > 0 and cone_contains(xi, til, yi, tt):
            tested += 1
            if not cone_contains(xi, std_big, yi, tt):
                bad += 1
    return {"A": A, "a": a, "c_aA": c, "samples": samples, "tested": tested, "violations": bad}
