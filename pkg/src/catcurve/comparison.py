"""Model-space trigonometry, comparison triangles and CAT(kappa) verdicts.

Model planes M_kappa are realised concretely: the Euclidean plane for
kappa = 0, the sphere of radius 1/sqrt(kappa) (unit vectors, lengths scaled by
sqrt(kappa)) and the hyperboloid {<p,p>_M = -1} with the Minkowski form for
kappa < 0.  Distances between placed points use chord formulas
(2 arcsin, 2 arcsinh of half chords), which stay accurate for close points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geodesics as geo
from .curve_model import CurvePoint, DomainError, MultiBranchCurve
from .geodesics import DEFAULT, DistanceResult, GeodesicSettings

__all__ = [
    "ComparisonDomainError",
    "ModelTriangle",
    "model_diameter",
    "comparison_angle",
    "model_distance",
    "ComparisonVerdict",
    "AngleCondition",
    "GluedSpace",
    "glued_distance",
    "cat_check_triangle",
    "alexandrov_angle_estimate",
    "branching_certificate",
    "BranchingReport",
    "side_fractions",
]


class ComparisonDomainError(ValueError):
    """The triangle is too large to have a comparison triangle in M_kappa."""


def model_diameter(kappa: float) -> float:
    return math.pi / math.sqrt(kappa) if kappa > 0 else math.inf


def _check_sides(kappa, a, b, c):
    if min(a, b, c) <= 0:
        raise ValueError(f"degenerate side lengths ({a}, {b}, {c})")
    scale = a + b + c
    if a > b + c + 1e-12 * scale or b > a + c + 1e-12 * scale or c > a + b + 1e-12 * scale:
        raise ValueError(f"side lengths ({a}, {b}, {c}) violate the triangle inequality")
    if a + b + c >= 2 * model_diameter(kappa):
        raise ComparisonDomainError(
            f"perimeter {a + b + c:.6g} >= 2 D_kappa = {2 * model_diameter(kappa):.6g}")


def comparison_angle(kappa: float, a: float, b: float, c: float) -> float:
    """Angle between sides a and b of the M_kappa triangle with opposite side c.

    Half-angle form of the law of cosines, stable for thin triangles.
    """
    _check_sides(kappa, a, b, c)
    if kappa == 0:
        s2 = (c * c - (a - b) ** 2) / (4 * a * b)
    elif kappa > 0:
        k = math.sqrt(kappa)
        a, b, c = k * a, k * b, k * c
        s2 = (math.sin(c / 2) ** 2 - math.sin((a - b) / 2) ** 2) / (math.sin(a) * math.sin(b))
    else:
        k = math.sqrt(-kappa)
        a, b, c = k * a, k * b, k * c
        s2 = (math.sinh(c / 2) ** 2 - math.sinh((a - b) / 2) ** 2) / (math.sinh(a) * math.sinh(b))
    return 2 * math.asin(math.sqrt(min(1.0, max(0.0, s2))))


@dataclass(frozen=True)
class ModelTriangle:
    """Comparison triangle with vertices X, Y, Z.

    Sides are indexed 0: X->Y, 1: Y->Z, 2: Z->X; ``sides`` holds their lengths
    and ``angles`` the vertex angles at X, Y, Z.
    """

    kappa: float
    sides: tuple
    angles: tuple
    _vertices: tuple = field(repr=False, compare=False)

    @classmethod
    def from_sides(cls, kappa: float, xy: float, yz: float, zx: float) -> "ModelTriangle":
        _check_sides(kappa, xy, yz, zx)
        ax = comparison_angle(kappa, xy, zx, yz)
        ay = comparison_angle(kappa, xy, yz, zx)
        az = comparison_angle(kappa, yz, zx, xy)
        verts = _place(kappa, xy, zx, ax)
        return cls(float(kappa), (xy, yz, zx), (ax, ay, az), verts)

    @property
    def perimeter(self) -> float:
        return float(sum(self.sides))

    def point(self, side: int, s: float) -> np.ndarray:
        """Placed point at arc length s from the first vertex of ``side``."""
        L = self.sides[side]
        if not -1e-12 <= s <= L * (1 + 1e-12):
            raise ValueError(f"arc length {s} outside side {side} of length {L}")
        P = self._vertices[side]
        Q = self._vertices[(side + 1) % 3]
        return _along(self.kappa, P, Q, L, min(max(s, 0.0), L))

    def distance(self, p: np.ndarray, q: np.ndarray) -> float:
        return _dist(self.kappa, p, q)


def _place(kappa, xy, zx, angle_x):
    c, s = math.cos(angle_x), math.sin(angle_x)
    if kappa == 0:
        return (np.array([0.0, 0.0]), np.array([xy, 0.0]), np.array([zx * c, zx * s]))
    if kappa > 0:
        k = math.sqrt(kappa)
        a, b = k * xy, k * zx
        X = np.array([1.0, 0.0, 0.0])
        Y = np.array([math.cos(a), math.sin(a), 0.0])
        Z = np.array([math.cos(b), math.sin(b) * c, math.sin(b) * s])
        return (X, Y, Z)
    k = math.sqrt(-kappa)
    a, b = k * xy, k * zx
    X = np.array([1.0, 0.0, 0.0])
    Y = np.array([math.cosh(a), math.sinh(a), 0.0])
    Z = np.array([math.cosh(b), math.sinh(b) * c, math.sinh(b) * s])
    return (X, Y, Z)


def _mink(p, q):
    return -p[0] * q[0] + p[1] * q[1] + p[2] * q[2]


def _along(kappa, P, Q, L, s):
    if L == 0:
        return P.copy()
    if kappa == 0:
        return P + (s / L) * (Q - P)
    if kappa > 0:
        k = math.sqrt(kappa)
        T = Q - P * math.cos(k * L)
        T = T / np.linalg.norm(T)
        return P * math.cos(k * s) + T * math.sin(k * s)
    k = math.sqrt(-kappa)
    T = Q - P * math.cosh(k * L)
    T = T / math.sqrt(_mink(T, T))
    return P * math.cosh(k * s) + T * math.sinh(k * s)


def _dist(kappa, p, q):
    if kappa == 0:
        return float(np.linalg.norm(p - q))
    d = p - q
    if kappa > 0:
        k = math.sqrt(kappa)
        return 2 / k * math.asin(min(1.0, float(np.linalg.norm(d)) / 2))
    k = math.sqrt(-kappa)
    return 2 / k * math.asinh(math.sqrt(max(0.0, _mink(d, d))) / 2)


def model_distance(kappa: float, triangle: ModelTriangle, p: tuple, q: tuple) -> float:
    """Distance in M_kappa between side points p = (side, arc length) and q."""
    if kappa != triangle.kappa:
        raise ValueError("kappa does not match the triangle's model plane")
    return triangle.distance(triangle.point(*p), triangle.point(*q))


# ----------------------------------------------------------------------------
# spaces


class GluedSpace:
    """Branches of a multi-branch curve glued at their common singular point.

    Same-branch pairs use ``connect``; cross-branch pairs are joined through
    the origin, d(x, y) = d_j(x, 0) + d_k(0, y).
    """

    def __init__(self, curve: MultiBranchCurve, settings: GeodesicSettings = DEFAULT):
        self.curve = curve
        self.settings = settings
        self.metrics = curve.metrics

    @classmethod
    def of(cls, space, settings: GeodesicSettings = DEFAULT) -> "GluedSpace":
        return space if isinstance(space, GluedSpace) else cls(space, settings)

    @property
    def working_radius(self) -> float:
        return self.curve.default_working_radius()

    def metric(self, point: CurvePoint):
        return self.metrics[point.branch_index]

    def segment_to_origin(self, point: CurvePoint):
        return geo.segment_to_origin(self.metric(point), point, self.settings)

    def distance(self, x: CurvePoint, y: CurvePoint) -> DistanceResult:
        return glued_distance(self, x, y)


def glued_distance(space: GluedSpace, x: CurvePoint, y: CurvePoint) -> DistanceResult:
    """Intrinsic distance in the glued space (see GluedSpace)."""
    for p in (x, y):
        if p.branch_index >= len(space.metrics):
            raise DomainError(f"branch {p.branch_index} does not exist")
    if x.is_origin or y.is_origin or x.branch_index == y.branch_index:
        branch = y.branch_index if x.is_origin else x.branch_index
        return geo.connect(space.metrics[branch], CurvePoint(branch, x.z), CurvePoint(branch, y.z),
                           settings=space.settings)
    sx = space.segment_to_origin(x)
    sy = space.segment_to_origin(y)
    path = geo.concatenate(sx, sy.reversed())
    return DistanceResult(path.length, path, True, {"regular": None, "through_origin": path.length},
                          tangent_angle=None)


# ----------------------------------------------------------------------------
# CAT(kappa) check


def side_fractions(n: int) -> np.ndarray:
    """Deterministic low-discrepancy fractions in (0, 1): the golden-ratio sequence."""
    g = (math.sqrt(5) - 1) / 2
    return np.mod(0.5 + g * np.arange(n), 1.0)


@dataclass(frozen=True)
class AngleCondition:
    vertex: str
    alexandrov: float
    comparison: float
    margin: float
    ok: bool
    route: str


@dataclass(frozen=True)
class ComparisonVerdict:
    satisfied: bool
    worst_margin: float
    witness: tuple
    samples_used: int
    angle_conditions: tuple = ()
    triangle: ModelTriangle | None = None
    tolerance: float = 0.0
    degenerate: bool = False

    @property
    def distance_condition(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def row(self) -> dict:
        out = {"satisfied": self.satisfied, "worst_margin": self.worst_margin,
               "witness": self.witness, "samples": self.samples_used}
        for ac in self.angle_conditions:
            out[f"angle_{ac.vertex}_margin"] = ac.margin
        return out


def _vertex_angle(space: GluedSpace, v: CurvePoint, pv: DistanceResult, qv: DistanceResult):
    """Exact Alexandrov angle at v between segments [v,p], [v,q]; returns (angle, route)."""
    if v.is_origin:
        pa, pb = pv.path.end, qv.path.end
        if pa.is_origin or pb.is_origin:
            return 0.0, "trivial"
        if pa.branch_index != pb.branch_index:
            return math.pi, "cross-branch"
        met = space.metrics[pa.branch_index]
        return geo.alexandrov_angle_at_origin(met, pa, pb, space.settings), "origin-formula"
    ta, tb = _initial_direction(pv.path), _initial_direction(qv.path)
    return geo.unoriented_angle(ta, tb), "riemannian"


def _initial_direction(path) -> complex:
    v = path.zdot[0]
    if not np.isfinite(v) or v == 0:
        v = path.z[1] - path.z[0]
    return complex(v)


def cat_check_triangle(space, x: CurvePoint, y: CurvePoint, z: CurvePoint, kappa: float,
                       side_samples: int = 12, tolerance: float = 1e-6 + 1e-4,
                       angle_tolerance: float = 1e-4) -> ComparisonVerdict:
    """CAT(kappa) comparison for the geodesic triangle xyz.

    Samples ``side_samples`` points per side and compares the intrinsic
    distance of every pair on two different sides with the comparison
    triangle (3 * side_samples^2 pairs).  The angle condition is evaluated at
    all three vertices with exact angles.  A triangle fails when the worst
    margin is below ``-tolerance`` or an angle exceeds its comparison angle
    by more than ``angle_tolerance``.
    """
    space = GluedSpace.of(space)
    pts = (x, y, z)
    legs = [space.distance(pts[i], pts[(i + 1) % 3]) for i in range(3)]
    lengths = [r.value for r in legs]
    if min(lengths) == 0:
        return ComparisonVerdict(True, 0.0, (), 0, (), None, tolerance, degenerate=True)
    if sum(lengths) >= 2 * model_diameter(kappa):
        raise ComparisonDomainError(f"perimeter {sum(lengths):.6g} >= 2 D_kappa")
    # collinear triples can violate the triangle inequality at rounding level
    lengths = _repair(lengths)
    tri = ModelTriangle.from_sides(kappa, *lengths)
    frac = side_fractions(side_samples)
    side_pts = []
    for i, r in enumerate(legs):
        s = frac * r.path.length
        side_pts.append((s * lengths[i] / r.path.length, r.path.curve_points_at(s)))
    worst, witness, n = math.inf, (), 0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        si, pi = side_pts[i]
        sj, pj = side_pts[j]
        mi = [tri.point(i, s) for s in si]
        mj = [tri.point(j, s) for s in sj]
        for a in range(side_samples):
            for b in range(side_samples):
                d = space.distance(pi[a], pj[b]).value
                margin = tri.distance(mi[a], mj[b]) - d
                n += 1
                if margin < worst:
                    worst, witness = margin, ((i, float(si[a])), (j, float(sj[b])))
    conds = []
    names = "xyz"
    for k in range(3):
        v = pts[k]
        out = legs[k]                       # v -> next
        back = legs[(k + 2) % 3]            # prev -> v, reverse to start at v
        back_rev = DistanceResult(back.value, back.path.reversed(), back.through_origin, back.candidates)
        ang, route = _vertex_angle(space, v, out, back_rev)
        comp = tri.angles[k]
        margin = comp - ang
        conds.append(AngleCondition(names[k], ang, comp, margin, margin >= -angle_tolerance, route))
    sat = worst >= -tolerance and all(c.ok for c in conds)
    degenerate = max(tri.angles) > math.pi - 1e-6
    return ComparisonVerdict(sat, float(worst), witness, n, tuple(conds), tri, tolerance, degenerate)


def _repair(lengths):
    a, b, c = lengths
    out = []
    for s, o1, o2 in ((a, b, c), (b, c, a), (c, a, b)):
        out.append(min(s, o1 + o2))
    return out


# ----------------------------------------------------------------------------
# Alexandrov angle by the limit definition


def alexandrov_angle_estimate(space, vertex: CurvePoint, p: CurvePoint, q: CurvePoint,
                              t_values, cauchy_tol: float = 1e-3) -> float:
    """2 lim arcsin(d(alpha(t), beta(t)) / 2t), Richardson-extrapolated in t.

    alpha, beta are the segments from ``vertex`` to p and q; t_values must be
    a decreasing geometric sequence below both segment lengths.
    """
    space = GluedSpace.of(space)
    if p == q:
        return 0.0
    if p == vertex or q == vertex:
        raise ValueError("alexandrov_angle_estimate needs p and q different from the vertex")
    t_values = sorted(t_values, reverse=True)
    ratio = geo._geometric(t_values)
    a = space.distance(vertex, p).path
    b = space.distance(vertex, q).path
    if t_values[0] > min(a.length, b.length):
        raise ValueError("t_values exceed a segment length")
    pa = a.curve_points_at(t_values)
    pb = b.curve_points_at(t_values)
    vals = [2 * math.asin(min(1.0, space.distance(u, w).value / (2 * t)))
            for u, w, t in zip(pa, pb, t_values)]
    est, prev = geo.richardson(vals, ratio)
    if abs(est - prev) > cauchy_tol:
        raise geo.UnstableLimitError(f"angle extrapolation not Cauchy ({est:.6g} vs {prev:.6g})", vals)
    return min(math.pi, max(0.0, est))


# ----------------------------------------------------------------------------
# branching certificate


@dataclass
class BranchingReport:
    verified: bool
    branching: bool
    message: str
    x: CurvePoint | None = None
    rows: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return sum(1 for r in self.rows if r["ok"])


def branching_certificate(space, x: CurvePoint, directions: int = 8, radius: float | None = None,
                          mesh_factory=None, tolerance: float = 1e-5,
                          oracle_tolerance: float = 1e-6) -> BranchingReport:
    """Exhibit distinct minimizing extensions of the segment [x, 0] beyond 0.

    Endpoints y_k lie on the circle of chart radius ``radius`` (default |x|),
    at chart angles at least pi/m away from x on the same branch, and on every
    other branch.  Each extension is checked to be through-origin with
    d(x, y) = d(x, 0) + d(0, y) within ``tolerance``; with ``mesh_factory``
    (branch index -> DiscMesh) the value is also checked against the Dijkstra
    oracle, which must not find a shorter path.
    """
    space = GluedSpace.of(space)
    if x.is_origin:
        raise ValueError("branching_certificate needs x different from the origin")
    multi = len(space.metrics) > 1
    m = space.metrics[x.branch_index].m
    if m == 1 and not multi:
        return BranchingReport(False, False, "no singular point: the curve is smooth at 0, "
                                             "geodesics do not branch", x)
    r = abs(x.z) if radius is None else radius
    ax = math.atan2(x.z.imag, x.z.real)
    targets = []
    if m > 1:
        lo, hi = math.pi / m + 0.05, 2 * math.pi - math.pi / m - 0.05
        k_same = directions if not multi else max(1, directions // 2)
        for k in range(k_same):
            th = lo + (hi - lo) * (k / max(1, k_same - 1))
            targets.append(CurvePoint(x.branch_index, r * complex(math.cos(ax + th), math.sin(ax + th))))
    others = [b for b in range(len(space.metrics)) if b != x.branch_index]
    k = 0
    while len(targets) < directions and others:
        b = others[k % len(others)]
        th = 2 * math.pi * k / directions
        targets.append(CurvePoint(b, r * complex(math.cos(th), math.sin(th))))
        k += 1
    dx = space.segment_to_origin(x).length
    rows = []
    for y in targets:
        res = space.distance(x, y)
        dy = space.segment_to_origin(y).length
        err = abs(res.value - (dx + dy))
        oracle = None
        oracle_ok = True
        if mesh_factory is not None and y.branch_index == x.branch_index:
            from .mesh_oracle import dijkstra_distance
            oracle, _ = dijkstra_distance(mesh_factory(x.branch_index), x.z, y.z)
            oracle_ok = oracle >= res.value - oracle_tolerance
        ok = res.through_origin and err <= tolerance and oracle_ok
        rows.append({"y": y, "distance": res.value, "sum": dx + dy, "error": err,
                     "through_origin": res.through_origin, "oracle": oracle, "ok": ok})
    n_ok = sum(1 for r in rows if r["ok"])
    verified = n_ok >= directions
    msg = f"{n_ok} of {directions} extensions verified"
    if not verified:
        msg += " (partial)"
    return BranchingReport(verified, True, msg, x, rows)
