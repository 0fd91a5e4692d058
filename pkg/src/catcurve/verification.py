"""Experiment suite: each entry checks one geometric property numerically.

``run_suite`` runs the experiments in a fixed order, records pass/fail, a
margin (positive means inside tolerance) and the runtime, and keeps going
after failures or exceptions.  Every experiment draws its random numbers from
its own generator seeded by (config seed, experiment name), so results do not
depend on which experiments are selected.
"""

from __future__ import annotations

import csv
import math
import time
import traceback
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from . import EXAMPLES, load_example
from . import comparison as cmp
from . import geodesics as geo
from . import mesh_oracle as mo
from .curve_model import (
    CurvePoint,
    MultiBranchCurve,
    curvature_sup_estimate,
    gaussian_curvature,
    load_curve_spec,
    second_fundamental_form_norm,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentReport",
    "EXPERIMENTS",
    "CRITERIA",
    "run_suite",
    "run_experiment",
    "resolve_curve",
]


@dataclass
class ExperimentConfig:
    curve: str = "cusp"
    working_radius: float | None = None
    mesh_rings: int = 40
    mesh_sectors: int = 96
    mesh_grading: float = 0.85
    seed: int = 20240607
    kappa: float | None = None
    experiments: tuple | None = None
    # sample counts
    curvature_grid: int = 32
    oracle_pairs: int = 6
    triangles: int = 200
    degenerate_triangles: int = 5
    side_samples: int = 12
    gradient_points: int = 20
    convexity_segments: int = 50
    convexity_samples: int = 21
    sector_pairs: int = 50
    winding_segments: int = 40
    holder_samples: int = 50
    direction_samples: int = 200
    branching_directions: int = 8
    glued_triangles: int = 50
    sweep_halfwidth: float = 0.3
    sweep_step: float = 0.01
    # tolerances
    curvature_tol: float = 1e-8
    distance_tol: float = 1e-6
    oracle_tol: float = 1e-3
    oracle_cauchy_tol: float = 1e-3
    oracle_bias: float = 0.2
    cat_slack: float = 1e-4
    degenerate_tol: float = 1e-5
    cat_angle_tol: float = 1e-4
    angle_tol: float = 1e-3
    sin_half_tol: float = 1e-3
    flip_band: float = 0.02
    gradient_tol: float = 1e-4
    convexity_tol: float = 1e-6
    sector_tol: float = 1e-5
    loop_tol: float = 1e-9
    holder_change_tol: float = 0.05
    lipschitz_growth: float = 2.0
    lift_step_tol: float = 1e-6
    branching_tol: float = 1e-5
    glued_tol: float = 1e-12
    glued_angle_tol: float = 1e-6

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name.endswith("_tol") and not value > 0:
                raise ValueError(f"{name} must be positive (got {value})")


@dataclass
class ExperimentResult:
    name: str
    passed: bool
    margin: float
    runtime: float
    summary: str
    error: str | None = None
    header: tuple = ()
    rows: list = field(default_factory=list, repr=False)
    table_path: str | None = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name) -> ExperimentResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [f"curve: {self.config.curve}   seed: {self.config.seed}"]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"{status}  {r.name:<22} margin={r.margin:.8e}  time={r.runtime:.2f}s  {r.summary}")
            if r.error:
                lines.append(f"      error: {r.error.strip().splitlines()[-1]}")
        n_fail = sum(not r.passed for r in self.results)
        lines.append(f"{len(self.results) - n_fail} passed, {n_fail} failed")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in self.results:
            if r.rows:
                path = out / f"{r.name}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(r.header)
                    w.writerows([[_fmt(x) for x in row] for row in r.rows])
                r.table_path = str(path)
        summary = out / "summary.csv"
        with open(summary, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["experiment", "passed", "margin", "runtime_s", "summary", "table"])
            for r in self.results:
                w.writerow([r.name, r.passed, _fmt(r.margin), f"{r.runtime:.3f}", r.summary, r.table_path or ""])
        report = out / "report.txt"
        report.write_text(self.to_text())
        return report


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x) + 0.0:.8e}"
    if isinstance(x, complex):
        return f"{x.real:.8e}{x.imag:+.8e}j"
    return str(x)


def resolve_curve(ref) -> MultiBranchCurve:
    """A MultiBranchCurve, a bundled example name, or a path to a JSON spec."""
    if isinstance(ref, MultiBranchCurve):
        return ref
    if ref in EXAMPLES:
        return load_example(ref)
    return load_curve_spec(ref)


class _Context:
    def __init__(self, config: ExperimentConfig, curve: MultiBranchCurve):
        self.config = config
        self.curve = curve
        self.metric = curve.metrics[0]
        self.m = self.metric.m
        self.wr = config.working_radius or curve.default_working_radius()
        self._meshes = {}
        self._kappa = config.kappa

    def rng(self, name):
        return np.random.default_rng([self.config.seed, zlib.crc32(name.encode())])

    def mesh(self, branch=0):
        if branch not in self._meshes:
            c = self.config
            self._meshes[branch] = mo.build_mesh(self.curve.metrics[branch], c.mesh_rings, c.mesh_sectors,
                                                 c.mesh_grading)
        return self._meshes[branch]

    @property
    def kappa(self):
        if self._kappa is None:
            self._kappa = float(curvature_sup_estimate(self.metric, (0.01 * self.metric.domain_radius,
                                                                     self.metric.domain_radius))) + 0.0
        return self._kappa

    def random_point(self, rng, lo=0.05, hi=0.9, branch=0):
        r = self.wr * math.sqrt(rng.uniform(lo * lo, hi * hi))
        th = rng.uniform(0, 2 * math.pi)
        return CurvePoint(branch, r * complex(math.cos(th), math.sin(th)))


@dataclass
class _Outcome:
    passed: bool
    margin: float
    summary: str
    header: tuple = ()
    rows: list = field(default_factory=list)


def _not_applicable(reason):
    return _Outcome(True, math.inf, f"not applicable: {reason}")


def _rotationally_symmetric(metric) -> bool:
    H = metric.H
    if not np.allclose(H, np.diag(np.diag(H)), atol=0, rtol=0):
        return False
    for row in metric._C[0]:
        if np.count_nonzero(row) > 1:
            return False
    return True


# ----------------------------------------------------------------------------
# experiments


def exp_curvature(ctx: _Context) -> _Outcome:
    met = ctx.metric
    n = ctx.config.curvature_grid
    radii = np.linspace(0.05, 1.0, n) * met.domain_radius
    angles = np.linspace(0, 2 * math.pi, n, endpoint=False)
    worst, rows = 0.0, []
    for r in radii:
        for a in angles:
            z = r * complex(math.cos(a), math.sin(a))
            k = gaussian_curvature(met, z)
            b = second_fundamental_form_norm(met.branch, ctx.curve.ambient, z)
            gauss = -2 * b * b
            rel = abs(k - gauss) / max(abs(gauss), 1e-300) if gauss != 0 else abs(k)
            worst = max(worst, rel)
            rows.append((r, a, k, gauss, rel))
    tol = ctx.config.curvature_tol
    return _Outcome(worst <= tol, tol - worst, f"max relative |K + 2|B|^2| = {worst:.3e} on {n}x{n} grid",
                    ("radius", "angle", "K_analytic", "K_gauss", "rel_err"), rows)


def exp_oracle_convergence(ctx: _Context) -> _Outcome:
    rng = ctx.rng("oracle_convergence")
    base = ctx.mesh()
    meshes = [base, base.refined()]
    meshes.append(meshes[1].refined())
    V = base.vertices
    pool = V[(np.abs(V) >= 0.05 * ctx.wr) & (np.abs(V) <= ctx.wr)]
    rows, worst_cauchy, worst_mono, bias_ok = [], 0.0, 0.0, True
    for _ in range(ctx.config.oracle_pairs):
        x, y = rng.choice(pool, 2, replace=False)
        vals = [mo.dijkstra_distance(mm, x, y)[0] for mm in meshes]
        d = geo.connect(ctx.metric, x, y).value
        mono = max(vals[1] - vals[0], vals[2] - vals[1])
        cauchy = abs(vals[2] - vals[1])
        worst_mono = max(worst_mono, mono)
        worst_cauchy = max(worst_cauchy, cauchy)
        # the oracle is an upper bound, biased by the stencil anisotropy
        ok = d <= vals[2] + 1e-9 and vals[2] <= d * (1 + ctx.config.oracle_bias) + 1e-9
        bias_ok &= ok
        rows.append((x, y, *vals, d, mono, cauchy, ok))
    tol = ctx.config.oracle_cauchy_tol
    passed = worst_mono <= 1e-12 and worst_cauchy <= tol and bias_ok
    margin = tol - worst_cauchy if worst_mono <= 1e-12 else -worst_mono
    return _Outcome(passed, margin,
                    f"max increase {worst_mono:.2e}, last-level change {worst_cauchy:.2e}, "
                    f"ODE within oracle bracket: {bias_ok}",
                    ("x", "y", "mesh0", "mesh1", "mesh2", "ode", "max_increase", "cauchy", "bracket_ok"), rows)


def exp_closed_form(ctx: _Context) -> _Outcome:
    met = ctx.metric
    x = complex(ctx.wr)
    ref, _ = quad(lambda s: float(met.sqrt_lam(complex(s))), 0.0, ctx.wr, epsabs=1e-14, epsrel=1e-13)
    ode = geo.segment_to_origin(met, x).length
    dij, _ = mo.dijkstra_distance(ctx.mesh(), 0j, x)
    c = ctx.config
    rows = [("radial_quadrature", ref), ("ode", ode), ("dijkstra", dij)]
    if _rotationally_symmetric(met):
        e1, e2 = abs(ode - ref), abs(dij - ref)
        return _Outcome(e1 <= c.distance_tol and e2 <= c.oracle_tol,
                        min(c.distance_tol - e1, c.oracle_tol - e2),
                        f"d(0,{ctx.wr:g}) = {ode:.9f}; |ode-radial| = {e1:.2e}, |dijkstra-radial| = {e2:.2e}",
                        ("route", "value"), rows)
    lower = float(met.chord_to_origin(x))
    ok = lower - 1e-12 <= ode <= ref + 1e-9 and ode <= dij + 1e-9
    return _Outcome(ok, min(ode - lower, ref - ode, dij - ode),
                    f"non-symmetric metric: chord {lower:.6f} <= ode {ode:.9f} <= radial {ref:.6f}, "
                    f"dijkstra {dij:.6f}", ("route", "value"), rows + [("ambient_chord", lower)])


def exp_cat_batch(ctx: _Context) -> _Outcome:
    rng = ctx.rng("cat_batch")
    c = ctx.config
    kappa = ctx.kappa
    tol = c.distance_tol + c.cat_slack
    rows, worst, fails = [], math.inf, 0
    n = 0
    while n < c.triangles:
        pts = [ctx.random_point(rng) for _ in range(3)]
        try:
            v = cmp.cat_check_triangle(ctx.curve, *pts, kappa, c.side_samples, tol, c.cat_angle_tol)
        except cmp.ComparisonDomainError:
            continue  # redraw triangles above the comparison diameter
        n += 1
        worst = min(worst, v.worst_margin)
        fails += not v.satisfied
        rows.append(("random", *(p.z for p in pts), v.worst_margin,
                     min(a.margin for a in v.angle_conditions), v.satisfied))
    worst_deg = 0.0
    for k in range(c.degenerate_triangles):
        th = 2 * math.pi * (k + 0.5) / c.degenerate_triangles
        u = complex(math.cos(th), math.sin(th))
        L = geo.segment_to_origin(ctx.metric, 0.6 * ctx.wr * u).length
        ray = geo.ray_path(ctx.metric, u, L)
        pts = ray.curve_points_at([L / 3, 2 * L / 3, L])
        v = cmp.cat_check_triangle(ctx.curve, *pts, kappa, c.side_samples, tol, c.cat_angle_tol)
        worst_deg = max(worst_deg, abs(v.worst_margin))
        fails += not v.satisfied
        rows.append(("collinear", *(p.z for p in pts), v.worst_margin,
                     min(a.margin for a in v.angle_conditions), v.satisfied))
    passed = fails == 0 and worst_deg <= c.degenerate_tol
    margin = min(worst + tol, c.degenerate_tol - worst_deg)
    return _Outcome(passed, margin,
                    f"kappa={kappa:.6g}: {fails} failing of {len(rows)}; worst margin {worst:.3e}, "
                    f"collinear |margin| <= {worst_deg:.2e}",
                    ("kind", "x", "y", "z", "worst_margin", "worst_angle_margin", "satisfied"), rows)


def _t_values(t0, n=3):
    return [t0 * 2.0 ** -k for k in range(n)]


def exp_angle_at_origin(ctx: _Context) -> _Outcome:
    met, m = ctx.metric, ctx.m
    r = 0.6 * ctx.wr
    rows, worst = [], 0.0
    x = CurvePoint(0, r)
    t0 = 0.25 * geo.segment_to_origin(met, r).length
    for k in (1, 2, 3):
        dth = k * math.pi / (4 * m)
        y = CurvePoint(0, r * complex(math.cos(dth), math.sin(dth)))
        formula = geo.alexandrov_angle_at_origin(met, x, y)
        est = cmp.alexandrov_angle_estimate(ctx.curve, CurvePoint.origin(), x, y, _t_values(t0))
        err = abs(formula - est)
        worst = max(worst, err)
        rows.append((dth, formula, est, err))
    tol = ctx.config.angle_tol
    return _Outcome(worst <= tol, tol - worst, f"max |formula - limit estimator| = {worst:.2e}",
                    ("chart_separation", "formula", "estimator", "abs_err"), rows)


def exp_sin_half_angle(ctx: _Context) -> _Outcome:
    met, m = ctx.metric, ctx.m
    dth = math.pi / (2 * m) if m > 1 else math.pi / 3
    expected = math.sin(min(math.pi, m * dth) / 2)
    t0 = 0.1 * ctx.wr
    est = geo.sin_half_angle_limit(met, 0.0, dth, _t_values(t0))
    err = abs(est - expected)
    tol = ctx.config.sin_half_tol
    return _Outcome(err <= tol, tol - err,
                    f"rays {dth:.6f} apart: limit {est:.9f} vs sin(angle/2) = {expected:.9f}",
                    ("chart_separation", "estimate", "expected"), [(dth, est, expected)])


def exp_through_origin_sweep(ctx: _Context) -> _Outcome:
    met, m = ctx.metric, ctx.m
    if m == 1:
        return _not_applicable("no singular point (m = 1)")
    c = ctx.config
    r = 0.6 * ctx.wr
    thr = math.pi / m
    steps = int(round(2 * c.sweep_halfwidth / c.sweep_step))
    rows, flips, prev, inconsistent = [], [], None, 0
    for i in range(steps + 1):
        dth = thr - c.sweep_halfwidth + i * c.sweep_step
        y = r * complex(math.cos(dth), math.sin(dth))
        res = geo.connect(met, r, y)
        tangent = geo.alexandrov_angle_at_origin(met, r, y) / m if res.tangent_angle is None else res.tangent_angle
        expect = tangent >= thr
        if abs(tangent - thr) > c.flip_band and expect != res.through_origin:
            inconsistent += 1
        if prev is not None and res.through_origin != prev:
            flips.append(dth)
        prev = res.through_origin
        rows.append((dth, tangent, res.through_origin, res.candidates.get("regular"),
                     res.candidates.get("through_origin"), res.value))
    offset = abs(flips[0] - thr) if len(flips) == 1 else math.inf
    symmetric = _rotationally_symmetric(met)
    passed = len(flips) == 1 and inconsistent == 0 and (offset <= c.flip_band or not symmetric)
    return _Outcome(passed, c.flip_band - offset if len(flips) == 1 else -math.inf,
                    f"{len(flips)} flip(s) at {', '.join(f'{f:.4f}' for f in flips)} (pi/m = {thr:.4f}); "
                    f"{inconsistent} rows disagree with the tangent criterion",
                    ("chart_separation", "tangent_angle", "through_origin", "regular", "through", "value"), rows)


def exp_gradient(ctx: _Context) -> _Outcome:
    rng = ctx.rng("gradient")
    rows, worst = [], 0.0
    for _ in range(ctx.config.gradient_points):
        p = ctx.random_point(rng, 0.1, 0.9)
        g = geo.distance_gradient_check(ctx.metric, p.z)
        worst = max(worst, g.rel_err)
        rows.append((p.z, *g.analytic, *g.numeric, g.rel_err))
    tol = ctx.config.gradient_tol
    return _Outcome(worst <= tol, tol - worst, f"max relative gradient error {worst:.2e}",
                    ("z", "analytic_x", "analytic_y", "numeric_x", "numeric_y", "rel_err"), rows)


def _dist_to_origin(metric, z):
    return 0.0 if z == 0 else geo.segment_to_origin(metric, z).length


def exp_convexity(ctx: _Context) -> _Outcome:
    rng = ctx.rng("convexity")
    c = ctx.config
    rows, worst_second, worst_ball = [], math.inf, -math.inf
    for _ in range(c.convexity_segments):
        x, y = ctx.random_point(rng), ctx.random_point(rng)
        res = geo.connect(ctx.metric, x, y)
        s = np.linspace(0, res.value, c.convexity_samples)
        zs, _, _ = res.path.states_at(s)
        f = np.array([_dist_to_origin(ctx.metric, complex(z)) for z in zs])
        second = f[:-2] - 2 * f[1:-1] + f[2:]
        ball = f[1:-1].max() - max(f[0], f[-1])
        worst_second = min(worst_second, second.min())
        worst_ball = max(worst_ball, ball)
        rows.append((x.z, y.z, res.value, res.through_origin, second.min(), ball))
    tol = c.convexity_tol
    passed = worst_second >= -tol and worst_ball <= tol
    return _Outcome(passed, min(worst_second + tol, tol - worst_ball),
                    f"min second difference {worst_second:.2e}, max interior excess {worst_ball:.2e}",
                    ("x", "y", "length", "through_origin", "min_second_difference", "ball_excess"), rows)


def _lift_offset(u, base):
    """Signed turn fraction from base to u, in (-1/2, 1/2]."""
    w = u * np.conj(base)
    return math.atan2(w.imag, w.real) / (2 * math.pi)


def exp_sector_convexity(ctx: _Context) -> _Outcome:
    rng = ctx.rng("sector_convexity")
    c, m = ctx.config, ctx.m
    rows, worst = [], -math.inf
    n = 0
    while n < c.sector_pairs:
        x = ctx.random_point(rng, 0.1, 0.9)
        dth = rng.uniform(-0.95, 0.95) * math.pi / m
        r = ctx.wr * rng.uniform(0.1, 0.9)
        y = r * x.z / abs(x.z) * complex(math.cos(dth), math.sin(dth))
        ux = geo.segment_to_origin(ctx.metric, x.z).normalization_tangent.direction
        uy = geo.segment_to_origin(ctx.metric, y).normalization_tangent.direction
        spread = _lift_offset(uy, ux)
        if abs(spread) >= 1 / (2 * m):
            continue
        n += 1
        lo, hi = min(0.0, spread), max(0.0, spread)
        res = geo.connect(ctx.metric, x.z, y)
        zs, _, _ = res.path.states_at(np.linspace(0, res.value, 21))
        excess = 0.0
        for z in zs[1:-1]:
            if z == 0:
                continue
            u = geo.segment_to_origin(ctx.metric, complex(z)).normalization_tangent.direction
            off = _lift_offset(u, ux)
            excess = max(excess, lo - off, off - hi)
        worst = max(worst, excess)
        rows.append((x.z, y, spread, excess))
    tol = c.sector_tol
    return _Outcome(worst <= tol, tol - worst, f"max excursion outside the sector {worst:.2e} turns",
                    ("x", "y", "lift_spread", "excursion"), rows)


def exp_winding(ctx: _Context) -> _Outcome:
    rng = ctx.rng("winding")
    c = ctx.config
    rows, worst = [], 0.0
    for k in range(c.winding_segments):
        if k % 2:
            p = ctx.random_point(rng)
            path = geo.segment_to_origin(ctx.metric, p.z)
            kind = "to_origin"
        else:
            res = geo.connect(ctx.metric, ctx.random_point(rng), ctx.random_point(rng))
            path, kind = res.path, "through_origin" if res.through_origin else "regular"
        w = geo.winding_of_path(path)
        worst = max(worst, abs(w))
        rows.append((kind, path.z[0], path.z[-1], w))
    loop = 0.2 * np.exp(2j * np.pi * np.linspace(0, 1, 257))
    loop_w = mo.winding_number(loop)
    loop_err = abs(loop_w - 1.0)
    rows.append(("circle_loop", loop[0], loop[-1], loop_w))
    passed = worst < 1 and loop_err <= c.loop_tol
    return _Outcome(passed, min(1 - worst, c.loop_tol - loop_err),
                    f"max |winding| over segments {worst:.4f}; circle loop {loop_w:.12f}",
                    ("kind", "start", "end", "winding"), rows)


def _leading_transverse_power(branch) -> int:
    powers = []
    for a in branch.psi[1:]:
        nz = [k for k in range(1, len(a)) if a[k] != 0]
        if nz:
            powers.append(nz[0])
    return min(powers) if powers else 0


def exp_holder(ctx: _Context) -> _Outcome:
    met, m = ctx.metric, ctx.m
    if m == 1:
        return _not_applicable("exponent 1/m = 1 at a smooth point")
    c = ctx.config
    x = 0.6 * ctx.wr * complex(math.cos(0.7), math.sin(0.7))
    seg = geo.segment_to_origin(met, x).reversed()
    Ns = [c.holder_samples, 2 * c.holder_samples, 4 * c.holder_samples]
    h = [geo.holder_seminorm(seg, 1.0 / m, samples=n) for n in Ns]
    lip = [geo.holder_seminorm(seg, 1.0, samples=n) for n in Ns]
    change = max(abs(h[1] - h[0]) / h[0], abs(h[2] - h[1]) / h[1])
    growth = lip[2] / lip[0]
    k = _leading_transverse_power(met.branch)
    sharp = 0 < k < m
    rows = list(zip(Ns, h, lip))
    ok = change < c.holder_change_tol and (growth > c.lipschitz_growth or not sharp)
    margin = c.holder_change_tol - change
    if sharp:
        margin = min(margin, growth - c.lipschitz_growth)
    note = "" if sharp else " (tangent smoother than 1/m here; growth not required)"
    return _Outcome(ok, margin, f"1/m seminorm change {change:.2%}, Lipschitz growth x{growth:.3f}{note}",
                    ("samples", "holder_1_over_m", "lipschitz"), rows)


def exp_direction_maps(ctx: _Context) -> _Outcome:
    met, m = ctx.metric, ctx.m
    c = ctx.config
    tab = geo.boundary_direction_maps(met, 0.6 * ctx.wr, c.direction_samples)
    min_step = float(np.diff(tab.lift).min())
    wind = tab.ambient_winding
    incr = tab.lift_increment
    ok = bool(tab.ok.all()) and min_step >= -c.lift_step_tol and abs(wind - m) < 1e-6 and abs(incr - 1) < 1e-6
    return _Outcome(ok, min(min_step + c.lift_step_tol, 1e-6 - abs(wind - m)),
                    f"min lift step {min_step:.3e}, lift increment {incr:.9f}, ambient winding {wind:.9f} (m={m})",
                    ("t", "tangent_re", "tangent_im", "lift", "ambient_re", "ambient_im", "length", "ok"),
                    tab.rows())


def exp_branching(ctx: _Context) -> _Outcome:
    c = ctx.config
    x = CurvePoint(0, 0.6 * ctx.wr)
    rep = cmp.branching_certificate(ctx.curve, x, c.branching_directions, mesh_factory=ctx.mesh,
                                    tolerance=c.branching_tol)
    if not rep.branching:
        return _not_applicable(rep.message)
    worst = max(r["error"] for r in rep.rows)
    rows = [(r["y"].branch_index, r["y"].z, r["distance"], r["sum"], r["error"], r["through_origin"],
             r["oracle"] if r["oracle"] is not None else math.nan, r["ok"]) for r in rep.rows]
    return _Outcome(rep.verified, c.branching_tol - worst, rep.message,
                    ("branch", "y", "distance", "d_x0_plus_d_0y", "abs_err", "through_origin", "oracle", "ok"),
                    rows)


def exp_glued(ctx: _Context) -> _Outcome:
    c = ctx.config
    curve = ctx.curve
    if len(curve.branches) < 2:
        # glue two copies of the branch at the singular point
        curve = MultiBranchCurve((curve.branches[0], curve.branches[0]), curve.ambient, curve.working_radius)
    space = cmp.GluedSpace(curve)
    wr = ctx.wr
    x, y = CurvePoint(0, 0.6 * wr), CurvePoint(1, 0.8 * wr)
    glued = space.distance(x, y).value
    dx = space.segment_to_origin(x).length
    dy = space.segment_to_origin(y).length
    sum_err = abs(glued - (dx + dy))
    # same-branch restriction equals connect
    same = abs(space.distance(x, CurvePoint(0, 0.5j * wr)).value
               - geo.connect(curve.metrics[0], x.z, 0.5j * wr).value)
    rng = ctx.rng("glued")
    kappa = max(ctx.kappa, max(float(curvature_sup_estimate(mt, (0.01 * mt.domain_radius, mt.domain_radius)))
                               for mt in curve.metrics[1:]))
    tol = c.distance_tol + c.cat_slack
    rows, fails, worst = [], 0, math.inf
    for k in range(c.glued_triangles):
        branches = [int(b) for b in rng.integers(0, len(curve.branches), 3)]
        if len(set(branches)) == 1:
            branches[2] = (branches[0] + 1) % len(curve.branches)
        pts = [ctx.random_point(rng, branch=b) for b in branches]
        v = cmp.cat_check_triangle(space, *pts, kappa, c.side_samples, tol, c.cat_angle_tol)
        fails += not v.satisfied
        worst = min(worst, v.worst_margin)
        rows.append((*(f"{p.branch_index}:{p.z}" for p in pts), v.worst_margin, v.satisfied))
    # angle at a vertex whose two segments leave through the origin
    v = cmp.cat_check_triangle(space, CurvePoint(0, 0.5 * wr), CurvePoint(0, 0.4j * wr),
                               CurvePoint(1, 0.45 * wr), kappa, c.side_samples, tol, c.cat_angle_tol)
    angle_z = v.angle_conditions[2].alexandrov
    passed = (sum_err <= c.glued_tol and same <= c.glued_tol and fails == 0
              and angle_z <= c.glued_angle_tol and v.satisfied)
    return _Outcome(passed, min(c.glued_tol - sum_err, tol + worst, c.glued_angle_tol - angle_z),
                    f"cross-branch d = {glued:.12f} (sum error {sum_err:.1e}); {fails} failing of "
                    f"{c.glued_triangles} triangles; angle at cross-branch vertex {angle_z:.2e}",
                    ("x", "y", "z", "worst_margin", "satisfied"), rows)


EXPERIMENTS = (
    ("curvature", exp_curvature),
    ("oracle_convergence", exp_oracle_convergence),
    ("closed_form_distance", exp_closed_form),
    ("cat_batch", exp_cat_batch),
    ("angle_at_origin", exp_angle_at_origin),
    ("sin_half_angle", exp_sin_half_angle),
    ("through_origin_sweep", exp_through_origin_sweep),
    ("gradient", exp_gradient),
    ("convexity", exp_convexity),
    ("sector_convexity", exp_sector_convexity),
    ("winding", exp_winding),
    ("holder", exp_holder),
    ("direction_maps", exp_direction_maps),
    ("branching", exp_branching),
    ("glued", exp_glued),
)

# acceptance criterion number -> suite entry
CRITERIA = {
    1: "curvature", 2: "closed_form_distance", 3: "cat_batch", 4: "angle_at_origin",
    5: "sin_half_angle", 6: "through_origin_sweep", 7: "gradient", 8: "convexity",
    9: "winding", 10: "holder", 11: "direction_maps", 12: "branching", 13: "glued",
    14: "sector_convexity",
}


def run_experiment(name: str, config: ExperimentConfig, curve: MultiBranchCurve | None = None,
                   _ctx: _Context | None = None) -> ExperimentResult:
    funcs = dict(EXPERIMENTS)
    if name not in funcs:
        raise KeyError(f"unknown experiment {name!r}")
    ctx = _ctx or _Context(config, curve or resolve_curve(config.curve))
    t0 = time.perf_counter()
    try:
        out = funcs[name](ctx)
        res = ExperimentResult(name, bool(out.passed), float(out.margin), 0.0, out.summary,
                               header=out.header, rows=out.rows)
    except Exception as exc:  # the suite records and continues
        res = ExperimentResult(name, False, -math.inf, 0.0, f"error: {type(exc).__name__}: {exc}",
                               error=traceback.format_exc())
    res.runtime = time.perf_counter() - t0
    return res


def run_suite(config: ExperimentConfig, curve: MultiBranchCurve | None = None, out_dir=None) -> ExperimentReport:
    """Run the selected experiments (all by default) in the fixed order."""
    curve = curve or resolve_curve(config.curve)
    ctx = _Context(config, curve)
    names = [n for n, _ in EXPERIMENTS]
    if config.experiments is not None:
        unknown = set(config.experiments) - set(names)
        if unknown:
            raise KeyError(f"unknown experiments: {', '.join(sorted(unknown))}")
        names = [n for n in names if n in config.experiments]
    results = [run_experiment(n, config, _ctx=ctx) for n in names]
    report = ExperimentReport(config, results)
    if out_dir is not None:
        report.write(out_dir)
    return report
