"""Geodesics of the pullback metric, shortest paths and the intrinsic distance.

Geodesics are integrated in the normalisation chart.  Near the cone point
(``|z| < eps_core``) the chart ODE is singular; there the path is continued as
a radial chord, which is the straight line through the apex in the cone
coordinate ``w = z**m``.  Segments from the origin are therefore *launched*
radially from ``eps_core * u`` (``u`` the normalisation tangent) and the
launch angle is found by Newton shooting with Jacobi fields.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .curve_model import ConformalMetric, CurvePoint, DomainError

log = logging.getLogger(__name__)

__all__ = [
    "GeodesicSettings",
    "GeodesicPath",
    "NormalizationTangent",
    "DistanceResult",
    "ShootingError",
    "exp_map",
    "ray_path",
    "segment_to_origin",
    "connect",
    "alexandrov_angle_at_origin",
    "sin_half_angle_limit",
    "holder_seminorm",
    "distance_gradient_check",
    "boundary_direction_maps",
    "richardson",
    "winding_of_path",
]

# Gauss-Legendre nodes on [0, 1] for radial core lengths
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1)
_GL_W = 0.5 * _GL_W


class ShootingError(RuntimeError):
    """Shooting did not converge to the requested endpoint."""


@dataclass(frozen=True)
class GeodesicSettings:
    rtol: float = 1e-10
    atol: float = 1e-14
    eps_core_factor: float = 1e-3
    max_steps: int = 100_000
    newton_maxiter: int = 40
    tie_tol: float = 1e-7
    refine_tangent: bool = True
    perturbations: int = 3
    perturbation_step: float = 0.15


DEFAULT = GeodesicSettings()


@dataclass(frozen=True)
class NormalizationTangent:
    """Unit chart direction of a segment leaving the origin."""

    direction: complex

    @property
    def angle(self) -> float:
        return math.atan2(self.direction.imag, self.direction.real)

    def ambient(self, m: int) -> complex:
        """First coordinate of the ambient unit tangent, u**m."""
        return self.direction ** m


def unoriented_angle(u: complex, v: complex) -> float:
    return abs(math.atan2((np.conj(u) * v).imag, (np.conj(u) * v).real))


def core_length(metric: ConformalMetric, z: complex) -> float:
    """Metric length of the chart chord from 0 to z.

    sqrt(lam(tz)) |z| = m t^(m-1) |z|^m |e_1 + tz R(tz)|_H is a polynomial
    factor times a real-analytic one, so 8-point Gauss-Legendre is accurate.
    """
    if z == 0:
        return 0.0
    pts = _GL_X * z
    return float(abs(z) * np.dot(_GL_W, metric.sqrt_lam(pts)))


# ----------------------------------------------------------------------------
# raw integration


@dataclass
class _Run:
    status: int
    t: float
    y: np.ndarray
    outs: np.ndarray
    traj_t: np.ndarray
    traj_y: np.ndarray


def _integrate(metric: ConformalMetric, z0, v0, T, J0=0j, Jd0=0j, r_min=None, t_out=(),
               record=True, settings: GeodesicSettings = DEFAULT) -> _Run:
    y0 = np.array([z0, v0, J0, Jd0], dtype=np.complex128)
    eps = settings.eps_core_factor * metric.domain_radius
    r_min = (eps if metric.m > 1 else 0.0) if r_min is None else r_min
    t_out = np.ascontiguousarray(np.asarray(t_out, dtype=float))
    res = _kernels.integrate(*metric.kernel_args, y0, float(T), settings.rtol, settings.atol,
                             float(r_min), metric.domain_radius * (1 + 1e-9), t_out,
                             settings.max_steps, record)
    status, t, y, outs, n_out, tt, ty, nt = res
    return _Run(int(status), float(t), y, outs[:n_out], tt[:nt].copy(), ty[:nt].copy())


# ----------------------------------------------------------------------------
# paths


@dataclass(eq=False)
class _Piece:
    """One smooth stretch of geodesic, possibly preceded by a radial core chord.

    Forward orientation: arc length s in [0, length]; s < core lies on the
    chord from 0 to ``z0``; s >= core is the ODE solution from (z0, v0) at
    time s - core.  ``reverse`` flips the orientation.
    """

    metric: ConformalMetric
    branch: int
    z0: complex
    v0: complex
    T: float
    core: float = 0.0
    reverse: bool = False

    @property
    def length(self) -> float:
        return self.core + self.T

    def eval(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        sf = self.length - s if self.reverse else s
        z = np.empty(s.shape, complex)
        zd = np.empty(s.shape, complex)
        in_core = sf < self.core
        if np.any(in_core):
            u = self.z0 / abs(self.z0)
            frac = np.clip(sf[in_core] / self.core, 0, 1) ** (1.0 / self.metric.m)
            zc = frac * self.z0
            z[in_core] = zc
            with np.errstate(divide="ignore", invalid="ignore"):
                lam = self.metric.lam(zc)
                zd[in_core] = np.where(zc == 0, np.nan, u / np.sqrt(lam))
        rest = ~in_core
        if np.any(rest):
            tau = sf[rest] - self.core
            order = np.argsort(tau)
            run = _integrate(self.metric, self.z0, self.v0, float(tau[order[-1]]),
                             r_min=0.0, t_out=tau[order], record=False)
            if run.outs.shape[0] != tau.shape[0]:
                raise ShootingError("re-integration of a stored geodesic failed")
            zz = np.empty(tau.shape, complex)
            vv = np.empty(tau.shape, complex)
            zz[order] = run.outs[:, 0]
            vv[order] = run.outs[:, 1]
            z[rest] = zz
            zd[rest] = vv
        if self.reverse:
            zd = -zd
        return z, zd

    def reversed(self) -> "_Piece":
        return replace(self, reverse=not self.reverse)


@dataclass(eq=False)
class GeodesicPath:
    """A unit-speed path sampled in chart coordinates.

    ``t``, ``z``, ``zdot`` and ``branch`` are the recorded samples (adaptive
    integrator steps); ``point_at`` re-integrates exactly at any arc length.
    At the origin sample ``zdot`` is NaN (the chart speed is infinite there).
    """

    t: np.ndarray
    z: np.ndarray
    zdot: np.ndarray
    branch: np.ndarray
    length: float
    pieces: list = field(repr=False)
    unit_speed: bool = True
    passes_through_origin: bool = False
    origin_parameter: float | None = None
    normalization_tangent: NormalizationTangent | None = None
    status: str = "ok"
    core_error: float = 0.0

    @property
    def branch_index(self) -> int:
        return int(self.branch[0]) if self.branch.size else 0

    @property
    def metric(self) -> ConformalMetric:
        return self.pieces[0].metric

    @property
    def start(self) -> CurvePoint:
        return CurvePoint(int(self.branch[0]), complex(self.z[0]))

    @property
    def end(self) -> CurvePoint:
        return CurvePoint(int(self.branch[-1]), complex(self.z[-1]))

    def _locate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        offsets = np.cumsum([0.0] + [p.length for p in self.pieces])
        idx = np.clip(np.searchsorted(offsets, s, side="right") - 1, 0, len(self.pieces) - 1)
        return s, offsets, idx

    def states_at(self, s):
        """Exact (z, zdot, branch) arrays at arc lengths s."""
        s, offsets, idx = self._locate(s)
        z = np.empty(s.shape, complex)
        zd = np.empty(s.shape, complex)
        br = np.empty(s.shape, int)
        for k in np.unique(idx):
            sel = idx == k
            piece = self.pieces[k]
            loc = np.clip(s[sel] - offsets[k], 0, piece.length)
            z[sel], zd[sel] = piece.eval(loc)
            br[sel] = piece.branch
        return z, zd, br

    def point_at(self, s: float) -> complex:
        return complex(self.states_at([s])[0][0])

    def curve_point_at(self, s: float) -> CurvePoint:
        z, _, br = self.states_at([s])
        return CurvePoint(int(br[0]), complex(z[0]))

    def curve_points_at(self, s) -> list:
        z, _, br = self.states_at(s)
        return [CurvePoint(int(b), complex(w)) for b, w in zip(br, z)]

    def reversed(self) -> "GeodesicPath":
        L = self.length
        return GeodesicPath(
            t=(L - self.t)[::-1], z=self.z[::-1].copy(), zdot=-self.zdot[::-1],
            branch=self.branch[::-1].copy(), length=L,
            pieces=[p.reversed() for p in reversed(self.pieces)],
            unit_speed=self.unit_speed, passes_through_origin=self.passes_through_origin,
            origin_parameter=None if self.origin_parameter is None else L - self.origin_parameter,
            normalization_tangent=self.normalization_tangent, status=self.status,
            core_error=self.core_error)

    def speed_residual(self) -> float:
        """max | |zdot|^2 lam(z) - 1 | over recorded samples off the origin."""
        ok = self.z != 0
        if not np.any(ok):
            return 0.0
        lam = np.empty(ok.sum())
        zs, bs, vs = self.z[ok], self.branch[ok], self.zdot[ok]
        metrics = {p.branch: p.metric for p in self.pieces}
        for b in np.unique(bs):
            sel = bs == b
            lam[sel] = metrics[int(b)].lam(zs[sel])
        return float(np.max(np.abs(np.abs(vs) ** 2 * lam - 1)))

    def ambient_tangents(self, s=None):
        """Ambient tangent phi'(z) zdot (frame applied) at recorded samples or at s."""
        if s is None:
            z, zd, br, t = self.z, self.zdot, self.branch, self.t
        else:
            z, zd, br = self.states_at(s)
            t = np.atleast_1d(np.asarray(s, float))
        metrics = {p.branch: p.metric for p in self.pieces}
        out = np.zeros((z.shape[0], metrics[int(br[0])].branch.n), complex)
        for i in range(z.shape[0]):
            met = metrics[int(br[i])]
            A = met.branch.frame
            if z[i] == 0:
                u = self._origin_direction(t[i])
                vec = np.zeros(met.branch.n, complex)
                vec[0] = u ** met.m / met.e1_norm
            else:
                f = np.array([np.polynomial.polynomial.polyval(z[i], c) for c in met._C[0]])
                vec = f * zd[i]
            out[i] = vec if A is None else A @ vec
        return out

    def _origin_direction(self, s):
        # unit ambient direction at the origin: outgoing if s is the start
        nt = self.normalization_tangent
        if nt is None:
            raise ValueError("path through the origin without a normalisation tangent")
        if s < 0.5 * self.length:
            return nt.direction
        return -nt.direction if self.metric.m % 2 else nt.direction * np.exp(1j * np.pi / self.metric.m)

    def csv_rows(self):
        """(t, Re z, Im z, Re zdot, Im zdot) rows of the recorded samples."""
        return [(float(t), z.real, z.imag, v.real, v.imag)
                for t, z, v in zip(self.t, self.z, self.zdot)]

    def ambient_rows(self):
        """(t, phi(z) coordinates as re/im pairs) rows for plotting."""
        from .curve_model import evaluate_phi
        metrics = {p.branch: p.metric for p in self.pieces}
        rows = []
        for t, z, b in zip(self.t, self.z, self.branch):
            phi = evaluate_phi(metrics[int(b)].branch, z)
            rows.append((float(t),) + tuple(x for c in phi for x in (c.real, c.imag)))
        return rows


def _path_from_run(metric, branch, run: _Run, z0, v0, core=0.0, status="ok") -> GeodesicPath:
    t = run.traj_t + core
    z = run.traj_y[:, 0]
    zd = run.traj_y[:, 1]
    piece = _Piece(metric, branch, complex(z0), complex(v0), float(run.t), core)
    if core > 0:
        t = np.concatenate([[0.0], t])
        z = np.concatenate([[0j], z])
        zd = np.concatenate([[complex(np.nan, np.nan)], zd])
    return GeodesicPath(t=t, z=z, zdot=zd, branch=np.full(t.shape, branch), length=piece.length,
                        pieces=[piece], status=status)


def concatenate(first: GeodesicPath, second: GeodesicPath) -> GeodesicPath:
    """Join two paths sharing an endpoint (the junction sample is kept once)."""
    L1 = first.length
    origin_t = None
    if first.z[-1] == 0 and second.z[0] == 0:
        origin_t = L1
    elif first.passes_through_origin:
        origin_t = first.origin_parameter
    elif second.passes_through_origin:
        origin_t = L1 + second.origin_parameter
    return GeodesicPath(
        t=np.concatenate([first.t, L1 + second.t[1:]]),
        z=np.concatenate([first.z, second.z[1:]]),
        zdot=np.concatenate([first.zdot, second.zdot[1:]]),
        branch=np.concatenate([first.branch, second.branch[1:]]),
        length=L1 + second.length, pieces=first.pieces + second.pieces,
        unit_speed=first.unit_speed and second.unit_speed,
        passes_through_origin=origin_t is not None, origin_parameter=origin_t,
        normalization_tangent=first.normalization_tangent or second.normalization_tangent,
        status=first.status if first.status != "ok" else second.status,
        core_error=first.core_error + second.core_error)


def trivial_path(metric: ConformalMetric, point: CurvePoint) -> GeodesicPath:
    z = point.z
    piece = _Piece(metric, point.branch_index, z, 0j, 0.0)
    return GeodesicPath(t=np.zeros(1), z=np.array([z]), zdot=np.zeros(1, complex),
                        branch=np.array([point.branch_index]), length=0.0, pieces=[piece],
                        passes_through_origin=point.is_origin,
                        origin_parameter=0.0 if point.is_origin else None)


# ----------------------------------------------------------------------------
# exponential map


def exp_map(metric: ConformalMetric, z0: complex, v0: complex, T: float,
            settings: GeodesicSettings = DEFAULT, branch: int = 0) -> GeodesicPath:
    """Integrate the unit-speed geodesic from (z0, v0) for arc length T.

    Stops early with ``status="origin"`` when the path enters the core disc
    ``|z| < eps_core`` (hand-off to the cone model) and ``"boundary"`` when it
    leaves the chart disc.
    """
    z0 = metric.check(z0)
    if z0 == 0:
        raise DomainError("exp_map starts off the origin; use ray_path for segments from 0")
    lam0 = float(metric.lam(z0))
    if abs(abs(v0) ** 2 * lam0 - 1) > 1e-9:
        raise ValueError(f"initial velocity is not unit speed (|v|^2 lam = {abs(v0) ** 2 * lam0:.12g})")
    run = _integrate(metric, z0, v0, T, settings=settings)
    status = {_kernels.REACHED_T: "ok", _kernels.ORIGIN_EVENT: "origin",
              _kernels.BOUNDARY_EVENT: "boundary", _kernels.STEP_FAILURE: "failed"}[run.status]
    if run.status == _kernels.STEP_FAILURE:
        raise ShootingError("geodesic integration failed (step size underflow)")
    path = _path_from_run(metric, branch, run, z0, v0, status=status)
    if status == "origin":
        path.core_error = core_length(metric, complex(run.y[0]))
    return path


def ray_path(metric: ConformalMetric, direction: complex, length: float,
             settings: GeodesicSettings = DEFAULT, branch: int = 0) -> GeodesicPath:
    """Geodesic leaving the origin with normalisation tangent ``direction``."""
    u = complex(direction) / abs(direction)
    eps = settings.eps_core_factor * metric.domain_radius
    z0 = eps * u
    core = core_length(metric, z0)
    v0 = u / math.sqrt(float(metric.lam(z0)))
    run = _integrate(metric, z0, v0, max(length - core, 0.0), r_min=0.0, settings=settings)
    path = _path_from_run(metric, branch, run, z0, v0, core=core)
    path.passes_through_origin = True
    path.origin_parameter = 0.0
    path.normalization_tangent = NormalizationTangent(u)
    path.core_error = core * eps
    return path


# ----------------------------------------------------------------------------
# shooting


def _newton(F, p0, T0, target, tol, maxiter, max_dp=0.5):
    """Damped Newton on (angle, length) with residual z(T) - target.

    F(p, T) -> (ok, zT, J, vT, run).  Returns (p, T, run, residual).
    """
    p, T = p0, T0
    ok, zT, J, vT, run = F(p, T)
    shrink = 0
    while not ok and shrink < 12:
        T *= 0.7
        shrink += 1
        ok, zT, J, vT, run = F(p, T)
    if not ok:
        raise ShootingError("initial shot leaves the chart or hits the core")
    r = zT - target
    best = abs(r)
    for _ in range(maxiter):
        if best <= tol:
            return p, T, run, r
        M = np.array([[J.real, vT.real], [J.imag, vT.imag]])
        try:
            dp, dT = np.linalg.solve(M, [-r.real, -r.imag])
        except np.linalg.LinAlgError:
            raise ShootingError("singular shooting Jacobian") from None
        scale = 1.0
        if abs(dp) > max_dp:
            scale = max_dp / abs(dp)
        if T + scale * dT < 0.3 * T:
            scale = min(scale, 0.7 * T / abs(dT))
        accepted = False
        for _ in range(20):
            pn, Tn = p + scale * dp, T + scale * dT
            okn, zn, Jn, vn, runn = F(pn, Tn)
            if okn and abs(zn - target) < best:
                p, T, zT, J, vT, run = pn, Tn, zn, Jn, vn, runn
                r = zT - target
                best = abs(r)
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            if best <= 1e3 * tol:
                return p, T, run, r
            raise ShootingError(f"shooting stalled with residual {best:.3g}")
    if best <= 1e3 * tol:
        return p, T, run, r
    raise ShootingError(f"shooting did not converge (residual {best:.3g})")


def _shoot_tol(settings, target, metric):
    return max(10 * settings.rtol * max(abs(target), settings.eps_core_factor * metric.domain_radius), 1e-14)


def _origin_shot(metric, x, beta0, T0, eps, settings):
    """Newton over the launch angle of a ray from the origin towards chart point x."""

    def F(beta, T):
        u = complex(math.cos(beta), math.sin(beta))
        z0 = eps * u
        lam, gam, _, _ = metric.terms(z0)
        v0 = u / math.sqrt(lam)
        J0 = 1j * z0
        Jd0 = 1j * v0 - v0 * (gam * 1j * z0).real
        run = _integrate(metric, z0, v0, T, J0, Jd0, r_min=0.5 * eps, settings=settings)
        ok = run.status == _kernels.REACHED_T
        return ok, run.y[0], run.y[2], run.y[1], run

    beta, T, run, r = _newton(F, beta0, T0, x, _shoot_tol(settings, x, metric), settings.newton_maxiter)
    return beta, T, run, r


def _length_correction(metric, run, r):
    # first-order arc-length correction for the residual endpoint miss
    v = run.y[1]
    lam = float(metric.lam(run.y[0]))
    return float(-lam * (np.conj(v) * r).real)


@functools.lru_cache(maxsize=20000)
def _segment_to_origin_cached(metric: ConformalMetric, x: complex, settings: GeodesicSettings,
                              seed: float | None):
    eps = settings.eps_core_factor * metric.domain_radius
    if abs(x) <= eps:
        # inside the core: the cone chord is the segment to the accuracy we track
        u = x / abs(x)
        L = core_length(metric, x)
        piece = _Piece(metric, 0, x, u / math.sqrt(float(metric.lam(x))), 0.0, L)
        path = GeodesicPath(t=np.array([0.0, L]), z=np.array([0j, x]),
                            zdot=np.array([complex(np.nan, np.nan), u / math.sqrt(float(metric.lam(x)))]),
                            branch=np.zeros(2, int), length=L, pieces=[piece],
                            passes_through_origin=True, origin_parameter=0.0,
                            normalization_tangent=NormalizationTangent(u), core_error=L * eps)
        return path
    beta0 = math.atan2(x.imag, x.real) if seed is None else seed
    core_guess = core_length(metric, x)
    T0 = max(core_guess - core_length(metric, eps * complex(math.cos(beta0), math.sin(beta0))), 1e-12)
    beta, T, run, r = _origin_shot(metric, x, beta0, T0, eps, settings)
    u = complex(math.cos(beta), math.sin(beta))
    if settings.refine_tangent and metric.m > 1:
        # launch-angle error is O(eps); one Richardson step in eps removes it
        beta_h, T_h, run_h, r_h = _origin_shot(metric, x, beta, T, 0.5 * eps, settings)
        beta_ext = 2 * beta_h - beta
        u_tan = complex(math.cos(beta_ext), math.sin(beta_ext))
        beta, T, run, r, eps = beta_h, T_h, run_h, r_h, 0.5 * eps
        u = complex(math.cos(beta), math.sin(beta))
    else:
        u_tan = u
    z0 = eps * u
    v0 = u / math.sqrt(float(metric.lam(z0)))
    core = core_length(metric, z0)
    rec = _integrate(metric, z0, v0, T, r_min=0.0, settings=settings)
    path = _path_from_run(metric, 0, rec, z0, v0, core=core)
    path.length += _length_correction(metric, run, r)
    # the shot lands within the Newton residual of x; record the exact endpoint
    path.z[-1] = x
    path.t[-1] = path.length
    path.passes_through_origin = True
    path.origin_parameter = 0.0
    path.normalization_tangent = NormalizationTangent(u_tan)
    path.core_error = core * eps
    return path


def segment_to_origin(metric: ConformalMetric, x, settings: GeodesicSettings = DEFAULT,
                      seed_angle: float | None = None, mesh=None) -> GeodesicPath:
    """The segment from x to the origin (oriented x -> 0).

    ``normalization_tangent`` holds the unit chart direction of the segment at
    the origin (Richardson-extrapolated in the core radius).  If shooting fails
    and ``mesh`` is given, the oracle polyline seeds a retry; a polyline fallback
    is returned with ``status="fallback"`` as a last resort.
    """
    point = x if isinstance(x, CurvePoint) else CurvePoint(0, x)
    z = metric.check(point.z)
    if z == 0:
        raise DomainError("segment_to_origin needs a point other than the origin")
    try:
        path = _segment_to_origin_cached(metric, z, settings, seed_angle)
    except ShootingError:
        seeds = []
        if mesh is not None:
            from .mesh_oracle import dijkstra_distance
            _, poly = dijkstra_distance(mesh, 0j, z)
            pts = [p.z for p in poly.points if p.z != 0]
            if pts:
                seeds.append(math.atan2(pts[0].imag, pts[0].real))
        base = math.atan2(z.imag, z.real)
        seeds += [base + k * settings.perturbation_step * s
                  for k in range(1, settings.perturbations + 1) for s in (1, -1)]
        for s in seeds:
            try:
                path = _segment_to_origin_cached(metric, z, settings, s)
                break
            except ShootingError:
                continue
        else:
            if mesh is None:
                raise
            log.warning("segment_to_origin: shooting failed at z=%s, returning oracle polyline", z)
            return _polyline_fallback(metric, mesh, 0j, z, point.branch_index).reversed()
    path = _rebranch(path, point.branch_index)
    return path.reversed()


def _rebranch(path: GeodesicPath, branch: int) -> GeodesicPath:
    if branch == 0:
        return path
    return replace(path, branch=np.full(path.branch.shape, branch),
                   pieces=[replace(p, branch=branch) for p in path.pieces])


def _polyline_fallback(metric, mesh, a, b, branch):
    from .mesh_oracle import dijkstra_distance
    L, poly = dijkstra_distance(mesh, a, b)
    zs = np.array([p.z for p in poly.points])
    seg = np.abs(np.diff(zs))
    t = np.concatenate([[0.0], np.cumsum(seg)])
    t = t * (L / t[-1]) if t[-1] > 0 else t
    piece = _Piece(metric, branch, zs[0], 0j, 0.0, 0.0)
    return GeodesicPath(t=t, z=zs, zdot=np.full(zs.shape, np.nan + 0j), branch=np.full(zs.shape, branch),
                        length=L, pieces=[piece], unit_speed=False, status="fallback",
                        passes_through_origin=bool(np.any(zs == 0)))


def _regular_shot(metric, x, y, a0, T0, settings):
    lam_x = float(metric.lam(x))
    sx = 1 / math.sqrt(lam_x)

    def F(a, T):
        v0 = complex(math.cos(a), math.sin(a)) * sx
        run = _integrate(metric, x, v0, T, 0j, 1j * v0, settings=settings)
        ok = run.status == _kernels.REACHED_T
        return ok, run.y[0], run.y[2], run.y[1], run

    a, T, run, r = _newton(F, a0, T0, y, _shoot_tol(settings, y, metric), settings.newton_maxiter)
    v0 = complex(math.cos(a), math.sin(a)) * sx
    rec = _integrate(metric, x, v0, T, settings=settings)
    if rec.status != _kernels.REACHED_T:
        raise ShootingError("recorded regular shot hit the core")
    path = _path_from_run(metric, 0, rec, x, v0)
    path.length += _length_correction(metric, run, r)
    return path


def _cone_seed(metric: ConformalMetric, x: complex, y: complex):
    """Initial (angle, length) from the straight line in the unfolded cone w = z^m.

    None when the chart angle between x and y is >= pi/m (no straight line on
    the principal sheet).
    """
    m = metric.m
    ax = math.atan2(x.imag, x.real)
    d = math.atan2((y * np.conj(x)).imag, (y * np.conj(x)).real)
    if abs(m * d) >= math.pi:
        return None
    wx = abs(x) ** m
    wy = abs(y) ** m * complex(math.cos(m * d), math.sin(m * d))
    u = wy - wx
    a = ax + math.atan2(u.imag, u.real)
    mu = lambda z: math.sqrt(float(metric.lam(z))) / (m * abs(z) ** (m - 1))
    T = abs(u) * 0.5 * (mu(x) + mu(y))
    return a, T


@dataclass(eq=False)
class DistanceResult:
    value: float
    path: GeodesicPath
    through_origin: bool
    candidates: dict
    tangent_angle: float | None = None
    tie: bool = False

    @property
    def regular_length(self):
        return self.candidates.get("regular")

    @property
    def through_origin_length(self):
        return self.candidates.get("through_origin")


def regular_candidate(metric: ConformalMetric, x: complex, y: complex,
                      settings: GeodesicSettings = DEFAULT, mesh=None):
    """Shortest regular geodesic from x to y found by multi-start shooting, or None."""
    seeds = []
    cone = _cone_seed(metric, x, y)
    if cone is not None:
        seeds.append(cone)
    if mesh is not None:
        from .mesh_oracle import dijkstra_distance
        L, poly = dijkstra_distance(mesh, x, y)
        zs = [p.z for p in poly.points]
        if len(zs) > 1 and not any(w == 0 for w in zs):
            d = zs[1] - zs[0]
            seeds.append((math.atan2(d.imag, d.real), L))
    if not seeds:
        return None
    base = seeds[0]
    for k in range(1, settings.perturbations + 1):
        for sgn in (1, -1):
            seeds.append((base[0] + sgn * k * settings.perturbation_step, base[1]))
    best = None
    for a0, T0 in seeds:
        try:
            path = _regular_shot(metric, x, y, a0, T0, settings)
        except ShootingError:
            continue
        if best is None or path.length < best.length - 1e-12:
            best = path
        if cone is not None and (a0, T0) == cone:
            break  # the principal-sheet shot is the candidate; perturbations only on failure
    return best


def connect(metric: ConformalMetric, x, y, working_radius: float | None = None,
            settings: GeodesicSettings = DEFAULT, mesh=None) -> DistanceResult:
    """Shortest path between two chart points of one branch.

    Compares the regular candidate (shooting, seeded by the unfolded cone and
    optionally by the oracle mesh) with the path through the origin.  Within
    ``tie_tol`` the through-origin path is preferred (``value`` stays the
    smaller candidate length).  The through-origin
    candidate is skipped (reported as None) when the regular one is shorter
    than the ambient lower bound |phi(x)|_H + |phi(y)|_H.
    """
    px = x if isinstance(x, CurvePoint) else CurvePoint(0, x)
    py = y if isinstance(y, CurvePoint) else CurvePoint(0, y)
    zx, zy = metric.check(px.z), metric.check(py.z)
    branch = px.branch_index if not px.is_origin else py.branch_index
    if working_radius is not None:
        for w in (zx, zy):
            if abs(w) > working_radius * (1 + 1e-9):
                raise DomainError(f"|z| = {abs(w):.6g} lies outside the working radius {working_radius}")
    if zx == zy:
        return DistanceResult(0.0, trivial_path(metric, CurvePoint(branch, zx)), zx == 0,
                              {"regular": 0.0, "through_origin": None})
    if zx == 0 or zy == 0:
        other = zy if zx == 0 else zx
        seg = segment_to_origin(metric, other, settings, mesh=mesh)
        path = seg.reversed() if zx == 0 else seg
        path = _rebranch(path, branch)
        return DistanceResult(path.length, path, True, {"regular": None, "through_origin": path.length})
    reg = regular_candidate(metric, zx, zy, settings, mesh)
    # chords in the flat ambient space bound d(x,0) + d(0,y) from below
    through_lb = float(metric.chord_to_origin(zx) + metric.chord_to_origin(zy))
    if reg is not None and reg.length < through_lb - settings.tie_tol:
        path = _rebranch(reg, branch)
        return DistanceResult(path.length, path, False, {"regular": reg.length, "through_origin": None})
    sx = segment_to_origin(metric, zx, settings, mesh=mesh)
    sy = segment_to_origin(metric, zy, settings, mesh=mesh)
    through = concatenate(sx, sy.reversed())
    angle = unoriented_angle(sx.normalization_tangent.direction, sy.normalization_tangent.direction)
    cands = {"regular": None if reg is None else reg.length, "through_origin": through.length}
    tie = False
    if reg is not None and reg.length < through.length - settings.tie_tol:
        path, via = reg, False
    else:
        path, via = through, True
        if reg is not None and abs(reg.length - through.length) <= settings.tie_tol:
            tie = True
            log.info("connect: tie between regular and through-origin candidates (%.3g)",
                     reg.length - through.length)
    path = _rebranch(path, branch)
    # on a tie the through-origin path is reported, but the distance is the infimum
    value = min(path.length, reg.length) if tie else path.length
    return DistanceResult(value, path, via, cands, angle, tie)


# ----------------------------------------------------------------------------
# angles and limits


def alexandrov_angle_at_origin(metric: ConformalMetric, x, y, settings: GeodesicSettings = DEFAULT) -> float:
    """Angle at the origin between the segments to x and y: min(pi, m * chart angle)."""
    px = x if isinstance(x, CurvePoint) else CurvePoint(0, x)
    py = y if isinstance(y, CurvePoint) else CurvePoint(0, y)
    if px.is_origin or py.is_origin:
        raise ValueError("the angle at the origin needs two points other than the origin")
    ux = segment_to_origin(metric, px.z, settings).normalization_tangent.direction
    uy = segment_to_origin(metric, py.z, settings).normalization_tangent.direction
    return min(math.pi, metric.m * unoriented_angle(ux, uy))


def richardson(values, ratio: float = 2.0, orders=None):
    """Richardson table for values f(t0), f(t0/r), f(t0/r^2), ...

    Assumes an error expansion in t^orders[k] (default 1, 2, 3, ...).  Returns
    (best estimate, previous-level estimate) so the caller can judge whether
    the extrapolation is Cauchy.
    """
    row = [float(v) for v in values]
    if len(row) == 1:
        return row[0], row[0]
    orders = list(range(1, len(row))) if orders is None else list(orders)
    prev = row[-1]
    for p in orders[: len(row) - 1]:
        f = ratio ** p
        prev = row[-1]
        row = [(f * row[i + 1] - row[i]) / (f - 1) for i in range(len(row) - 1)]
    return row[0], prev


class UnstableLimitError(RuntimeError):
    def __init__(self, msg, data):
        super().__init__(msg)
        self.data = data


def _geometric(t_values):
    t = np.asarray(t_values, float)
    if t.size < 2:
        return 2.0
    r = t[:-1] / t[1:]
    if not np.allclose(r, r[0], rtol=1e-9):
        raise ValueError("t_values must form a geometric sequence")
    return float(r[0])


def sin_half_angle_limit(metric: ConformalMetric, x_ray, y_ray, t_values,
                         settings: GeodesicSettings = DEFAULT, cauchy_tol: float = 5e-3):
    """Extrapolated lim d(alpha(t), beta(t)) / 2t for two rays from the origin.

    Rays are given by their normalisation tangents (complex or angle).  The
    chart angle between them must be below pi/m.
    """
    ux = _as_direction(x_ray)
    uy = _as_direction(y_ray)
    ang = unoriented_angle(ux, uy)
    if ang >= math.pi / metric.m:
        raise ValueError(f"rays make chart angle {ang:.6g} >= pi/m; the ratio limit needs a smaller separation")
    t_values = sorted(t_values, reverse=True)
    ratio = _geometric(t_values)
    if ang == 0:
        return 0.0
    ra = ray_path(metric, ux, t_values[0], settings)
    rb = ray_path(metric, uy, t_values[0], settings)
    vals = []
    for t in t_values:
        a = ra.point_at(t)
        b = rb.point_at(t)
        vals.append(connect(metric, a, b, settings=settings).value / (2 * t))
    est, prev = richardson(vals, ratio)
    if abs(est - prev) > cauchy_tol:
        raise UnstableLimitError(f"extrapolation not Cauchy ({est:.6g} vs {prev:.6g})", vals)
    return est


def _as_direction(ray) -> complex:
    if isinstance(ray, (int, float)):
        return complex(math.cos(ray), math.sin(ray))
    ray = complex(ray)
    return ray / abs(ray)


# ----------------------------------------------------------------------------
# regularity and first variation


def holder_seminorm(path: GeodesicPath, exponent: float | None = None, samples: int | None = None) -> float:
    """sup |gamma'(t) - gamma'(s)| / |t - s|^exponent over sample pairs.

    The ambient tangent phi'(z) zdot is used; exponent defaults to 1/m.  With
    ``samples`` the path is re-sampled exactly at that many uniform arc
    lengths (endpoints included); otherwise the recorded samples are used.
    """
    if exponent is None:
        exponent = 1.0 / path.metric.m
    if samples is not None:
        t = np.linspace(0.0, path.length, samples)
        g = path.ambient_tangents(t)
    else:
        t = path.t
        g = path.ambient_tangents()
    if t.shape[0] < 3:
        raise ValueError("Hoelder seminorm needs at least 3 samples")
    diff = np.linalg.norm(g[:, None, :] - g[None, :, :], axis=2)
    dt = np.abs(t[:, None] - t[None, :])
    mask = dt > 0
    return float(np.max(diff[mask] / dt[mask] ** exponent))


@dataclass(frozen=True)
class GradientCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    rel_err: float


def distance_gradient_check(metric: ConformalMetric, x, h: float | None = None,
                            settings: GeodesicSettings = DEFAULT) -> GradientCheck:
    """Compare grad d(0, .) from the arriving tangent with central differences.

    Gradients are chart covectors (d/dRe z, d/dIm z).
    """
    z = complex(x.z if isinstance(x, CurvePoint) else x)
    if z == 0:
        raise DomainError("the distance to the origin is not differentiable at the origin")
    h = 1e-4 * abs(z) if h is None else h
    seg = segment_to_origin(metric, z, settings).reversed()
    zd = seg.zdot[-1]
    lam = float(metric.lam(z))
    analytic = lam * np.array([zd.real, zd.imag])

    def f(w):
        return segment_to_origin(metric, w, settings).length

    numeric = np.array([(f(z + h) - f(z - h)) / (2 * h), (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)])
    rel = float(np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic))
    return GradientCheck(analytic, numeric, rel)


# ----------------------------------------------------------------------------
# boundary direction maps


@dataclass(eq=False)
class DirectionTable:
    t: np.ndarray
    tangent: np.ndarray          # normalisation tangents (unit complex)
    lift: np.ndarray             # continuous lift of arg(tangent) / 2pi
    ambient: np.ndarray          # first coordinate of the ambient tangent, tangent**m
    length: np.ndarray           # d(0, sigma(t))
    ok: np.ndarray
    radius: float
    m: int

    @property
    def lift_increment(self) -> float:
        return float(self.lift[-1] - self.lift[0])

    @property
    def ambient_winding(self) -> float:
        ang = np.unwrap(np.angle(self.ambient))
        return float((ang[-1] - ang[0]) / (2 * np.pi))

    def rows(self):
        return [(float(t), u.real, u.imag, float(s), f.real, f.imag, float(L), bool(k))
                for t, u, s, f, L, k in zip(self.t, self.tangent, self.lift, self.ambient, self.length, self.ok)]


def boundary_direction_maps(metric: ConformalMetric, circle_radius: float, samples: int,
                            settings: GeodesicSettings = DEFAULT) -> DirectionTable:
    """Normalisation tangents of the segments from 0 to sigma(t) = r e^(2 pi i t).

    t runs over [0, 1] inclusive (``samples`` + 1 rows), so one full loop is
    covered and the lift increment over the loop can be read off.
    """
    t = np.linspace(0.0, 1.0, samples + 1)
    tang = np.empty(t.shape, complex)
    lengths = np.full(t.shape, np.nan)
    ok = np.ones(t.shape, bool)
    for i, ti in enumerate(t):
        z = circle_radius * complex(math.cos(2 * math.pi * ti), math.sin(2 * math.pi * ti))
        try:
            seg = segment_to_origin(metric, z, settings)
            tang[i] = seg.normalization_tangent.direction
            lengths[i] = seg.length
        except ShootingError:
            ok[i] = False
            tang[i] = z / abs(z)
    lift = np.unwrap(np.angle(tang)) / (2 * np.pi)
    return DirectionTable(t, tang, lift, tang ** metric.m, lengths, ok, circle_radius, metric.m)


def winding_of_path(path: GeodesicPath) -> float:
    """Winding number of the first-coordinate projection (z^m in normal form).

    A path through the origin is split there; the windings of the open
    pieces are summed (the projection only touches 0 at the split).
    """
    from .mesh_oracle import winding_number
    zero = np.flatnonzero(path.z == 0)
    cuts = np.concatenate([[-1], zero, [path.z.shape[0]]])
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        part = path.z[a + 1:b]
        if part.shape[0] >= 2:
            total += winding_number(part, path.metric.branch)
    return total
