"""Brute-force distance oracle: graded polar mesh with Dijkstra shortest paths.

Graph distances are upper bounds for the intrinsic distance (up to edge
quadrature error) and decrease under refinement.  Query points that are not
mesh vertices are attached to nearby vertices by straight-chord edges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .curve_model import AmbientMetric, ConformalMetric, CurvePoint, DomainError, NormalizedBranch

__all__ = [
    "DiscMesh",
    "PathPolyline",
    "build_mesh",
    "edge_length",
    "dijkstra_distance",
    "winding_number",
]


@dataclass(frozen=True)
class PathPolyline:
    points: tuple
    length: float

    @property
    def chart(self) -> np.ndarray:
        return np.array([p.z for p in self.points], dtype=complex)


def edge_length(metric: ConformalMetric, a: complex, b: complex, quad_order: int = 8) -> float:
    """Gauss-Legendre length of the straight chart chord [a, b].

    A chord passing near the origin is split at its closest point to 0, so
    each sub-chord has the |z|^(m-1) factor vanishing (if at all) at an end.
    With an endpoint at 0 the integrand is t^(m-1) times a real-analytic
    function, which the rule handles to near machine precision.
    """
    if quad_order < 2:
        raise ValueError("quad_order must be at least 2")
    a, b = complex(a), complex(b)
    d = b - a
    if d == 0:
        return 0.0
    x, w = _gl(quad_order)
    # closest point of the chord to the origin
    s = -(np.conj(d) * a).real / abs(d) ** 2
    cuts = [0.0, 1.0]
    if 0.0 < s < 1.0 and abs(a + s * d) < 0.25 * abs(d):
        cuts = [0.0, s, 1.0]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        t = lo + (hi - lo) * x
        total += (hi - lo) * float(np.dot(w, metric.sqrt_lam(a + t * d)))
    return total * abs(d)


def _edge_lengths(metric, a, b, quad_order):
    # vectorised edge_length for chords that do not pass through the origin interior
    x, w = _gl(quad_order)
    d = b - a
    s = -(np.conj(d) * a).real / np.abs(d) ** 2
    out = np.empty(a.shape[0])
    through = (s > 0) & (s < 1) & (np.abs(a + s * d) < 0.25 * np.abs(d))
    plain = ~through
    pts = a[plain, None] + x[None, :] * d[plain, None]
    out[plain] = np.abs(d[plain]) * (metric.sqrt_lam(pts.ravel()).reshape(pts.shape) @ w)
    for i in np.flatnonzero(through):
        out[i] = edge_length(metric, a[i], b[i], quad_order)
    return out


def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1), 0.5 * w


@dataclass(eq=False)
class DiscMesh:
    """Immutable polar mesh; vertex 0 is the origin."""

    metric: ConformalMetric
    vertices: np.ndarray
    edges: np.ndarray              # (E, 2) int
    lengths: np.ndarray            # (E,)
    rings: int
    sectors: int
    grading: float
    max_edge_chart_length: float
    quad_order: int = 8
    _graph: object = field(default=None, repr=False)

    @property
    def radii(self) -> np.ndarray:
        return self.metric.domain_radius * self.grading ** np.arange(self.rings)

    @property
    def graph(self):
        if self._graph is None:
            n = self.vertices.shape[0]
            i, j = self.edges[:, 0], self.edges[:, 1]
            g = coo_matrix((np.concatenate([self.lengths, self.lengths]),
                            (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
            self._graph = g.tocsr()
        return self._graph

    def is_connected(self) -> bool:
        return connected_components(self.graph, directed=False)[0] == 1

    def refined(self) -> "DiscMesh":
        """Mesh with doubled rings and sectors at the same grading.

        The refined mesh keeps this mesh's vertices and edges (nested
        refinement), so graph distances between shared vertices can only
        decrease.
        """
        return build_mesh(self.metric, 2 * self.rings, 2 * self.sectors, self.grading, self.quad_order,
                          parent=self)

    def dump(self, path) -> None:
        """Write vertex and edge tables as JSON."""
        doc = {
            "rings": self.rings, "sectors": self.sectors, "grading": self.grading,
            "vertices": [[v.real, v.imag] for v in self.vertices],
            "edges": [[int(a), int(b), float(L)] for (a, b), L in zip(self.edges, self.lengths)],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)


def build_mesh(branch, rings: int, sectors: int, grading: float, quad_order: int = 8,
               ambient: AmbientMetric | None = None, parent: DiscMesh | None = None) -> DiscMesh:
    """Polar mesh with radii R * grading^k (k < rings), ring, radial and both diagonal edges.

    ``branch`` may be a ConformalMetric or a NormalizedBranch (identity ambient
    metric unless ``ambient`` is given).
    """
    if rings < 2:
        raise ValueError(f"rings must be >= 2 (got {rings})")
    if sectors < 8:
        raise ValueError(f"sectors must be >= 8 (got {sectors})")
    if not 0.0 < grading < 1.0:
        raise ValueError(f"grading must lie in (0, 1) (got {grading})")
    if isinstance(branch, NormalizedBranch):
        metric = ConformalMetric(branch, ambient or AmbientMetric.identity(branch.n))
    else:
        metric = branch
    R = metric.domain_radius
    radii = R * grading ** np.arange(rings)
    ang = np.exp(2j * np.pi * np.arange(sectors) / sectors)
    verts = np.concatenate([[0j], (radii[:, None] * ang[None, :]).ravel()])

    k, j = np.meshgrid(np.arange(rings), np.arange(sectors), indexing="ij")
    here = 1 + k * sectors + j
    nxt = 1 + k * sectors + (j + 1) % sectors
    ring = np.stack([here.ravel(), nxt.ravel()], axis=1)
    inner_here = here[1:] if rings > 1 else here[:0]
    inner_nxt = nxt[1:]
    radial = np.stack([here[:-1].ravel(), inner_here.ravel()], axis=1)
    diag1 = np.stack([here[:-1].ravel(), inner_nxt.ravel()], axis=1)
    diag2 = np.stack([nxt[:-1].ravel(), inner_here.ravel()], axis=1)
    apex = np.stack([np.zeros(sectors, int), here[-1]], axis=1)
    edges = np.concatenate([ring, radial, diag1, diag2, apex]).astype(int)
    inherited = np.zeros((0, 2), int)
    inherited_len = np.zeros(0)
    if parent is not None:
        if (grading != parent.grading or rings % parent.rings or sectors % parent.sectors):
            raise ValueError("parent mesh is not nested in the requested mesh")
        step = sectors // parent.sectors
        old = parent.edges - 1
        k_old, j_old = old // parent.sectors, old % parent.sectors
        inherited = np.where(parent.edges == 0, 0, 1 + k_old * sectors + step * j_old)
        inherited_len = parent.lengths
    lengths = _edge_lengths(metric, verts[edges[:, 0]], verts[edges[:, 1]], quad_order)
    edges = np.concatenate([edges, inherited])
    lengths = np.concatenate([lengths, inherited_len])
    # drop duplicate edges, keeping the shorter weight
    key = np.sort(edges, axis=1)
    order = np.lexsort((lengths, key[:, 1], key[:, 0]))
    key, lengths = key[order], lengths[order]
    first = np.ones(key.shape[0], bool)
    first[1:] = np.any(key[1:] != key[:-1], axis=1)
    edges, lengths = key[first], lengths[first]
    chart = np.abs(verts[edges[:, 0]] - verts[edges[:, 1]])
    mesh = DiscMesh(metric, verts, edges, lengths, rings, sectors, grading, float(chart.max()), quad_order)
    if np.any(lengths <= 0):
        raise RuntimeError("mesh has an edge of non-positive length")
    return mesh


def _attachments(mesh: DiscMesh, z: complex):
    """Vertex indices and chord lengths connecting chart point z to the mesh."""
    d = np.abs(mesh.vertices - z)
    exact = np.flatnonzero(d <= 1e-14 * mesh.metric.domain_radius)
    if exact.size:
        return exact[:1], np.zeros(1)
    r = abs(z)
    # local cell size: radial gap and angular spacing at this radius
    k = 0 if r == 0 else min(max(int(math.log(r / mesh.metric.domain_radius) / math.log(mesh.grading)), 0),
                             mesh.rings - 1)
    rk = mesh.radii[k]
    cell = max(rk * (1 - mesh.grading), rk * 2 * math.pi / mesh.sectors)
    idx = np.flatnonzero(d <= 2.5 * cell)
    if idx.size < 4:
        idx = np.argsort(d)[:8]
    lens = np.array([edge_length(mesh.metric, z, mesh.vertices[i], mesh.quad_order) for i in idx])
    return idx, lens


def _as_point(a) -> CurvePoint:
    if isinstance(a, CurvePoint):
        return a
    return CurvePoint(0, complex(a))


def dijkstra_distance(mesh: DiscMesh, a, b) -> tuple:
    """Shortest graph path between chart points a and b; returns (length, PathPolyline)."""
    pa, pb = _as_point(a), _as_point(b)
    za, zb = mesh.metric.check(pa.z), mesh.metric.check(pb.z)
    branch = pa.branch_index
    if za == zb:
        return 0.0, PathPolyline((CurvePoint(branch, za),), 0.0)
    ia, la = _attachments(mesh, za)
    ib, lb = _attachments(mesh, zb)
    dist, pred = dijkstra(mesh.graph, directed=False, indices=ia, return_predecessors=True)
    tot = la[:, None] + dist[:, ib] + lb[None, :]
    s, e = np.unravel_index(np.argmin(tot), tot.shape)
    best = float(tot[s, e])
    if not np.isfinite(best):
        raise RuntimeError("mesh graph is disconnected")
    # a direct chord may beat the graph when both points share a cell
    direct = None
    if abs(za - zb) <= 3 * mesh.max_edge_chart_length:
        direct = edge_length(mesh.metric, za, zb, mesh.quad_order)
    if direct is not None and direct <= best:
        return direct, PathPolyline((CurvePoint(branch, za), CurvePoint(branch, zb)), direct)
    chain = []
    v = ib[e]
    while v >= 0:
        chain.append(v)
        if v == ia[s]:
            break
        v = pred[s, v]
    chain.reverse()
    pts = [za] + [complex(mesh.vertices[v]) for v in chain] + [zb]
    # drop duplicates from zero-length attachments
    dedup = [pts[0]]
    for p in pts[1:]:
        if p != dedup[-1]:
            dedup.append(p)
    return best, PathPolyline(tuple(CurvePoint(branch, p) for p in dedup), best)


def winding_number(path, branch: NormalizedBranch | None = None) -> float:
    """Continuous argument variation of the projected path, divided by 2 pi.

    ``path`` is a PathPolyline or an array of chart points; the projection is
    the first coordinate of the normal form, z^m.  Without ``branch`` the points
    are taken to be already projected.  Straight chart chords between samples
    are followed (subdivided finely enough to track the argument).
    """
    if isinstance(path, PathPolyline):
        pts = path.chart
    else:
        pts = np.asarray(path, dtype=complex)
    m = 1 if branch is None else branch.m
    if np.any(pts == 0):
        raise DomainError("projected path passes through 0; winding number undefined")
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        s = -(np.conj(d) * a).real / abs(d) ** 2 if d != 0 else 0.0
        closest = abs(a + min(max(s, 0.0), 1.0) * d)
        if closest == 0:
            raise DomainError("projected path passes through 0; winding number undefined")
        n = int(min(1e5, math.ceil(4 * m * abs(d) / closest))) + 1
        w = (a + np.linspace(0, 1, n + 1) * d) ** m
        total += float(np.sum(np.angle(w[1:] / w[:-1])))
    return total / (2 * math.pi)
