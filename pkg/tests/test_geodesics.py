import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.optimize import minimize

from catcurve import geodesics as geo
from catcurve import load_example
from catcurve.curve_model import CurvePoint, DomainError
from conftest import cusp_radial_distance, polar

angles = st.floats(0.0, 2 * math.pi)
radii = st.floats(0.05, 0.5)


@pytest.fixture(scope="module")
def pert():
    return load_example("perturbed_cusp").metrics[0]


# ---------------------------------------------------------------- reference routes

def ivp_geodesic(metric, z0, v0, T):
    """scipy reference: z'' = -(d/dz log lam) z'^2 as a real 4-system."""
    def rhs(_, y):
        z, v = complex(y[0], y[1]), complex(y[2], y[3])
        a = -complex(metric.dlog_lam(z)) * v * v
        return [v.real, v.imag, a.real, a.imag]
    sol = solve_ivp(rhs, (0, T), [z0.real, z0.imag, v0.real, v0.imag], method="DOP853",
                    rtol=1e-12, atol=1e-14)
    y = sol.y[:, -1]
    return complex(y[0], y[1])


def polyline_distance(metric, x, y, n=96):
    """Direct minimisation of a discretised path length (midpoint rule, O(1/n^2) error either way)."""
    t = np.linspace(0, 1, n + 1)[1:-1]
    z0 = x + t * (y - x)

    def length(p):
        z = np.concatenate([[x], p[: n - 1] + 1j * p[n - 1:], [y]])
        mid = 0.5 * (z[1:] + z[:-1])
        return float(np.sum(np.abs(np.diff(z)) * metric.sqrt_lam(mid)))

    res = minimize(length, np.concatenate([z0.real, z0.imag]), method="L-BFGS-B",
                   options={"maxiter": 20000, "maxfun": 10 ** 7, "ftol": 1e-15, "gtol": 1e-12})
    return res.fun


# ---------------------------------------------------------------- exp map

@given(st.floats(0.1, 0.5), angles, angles)
def test_exp_map_matches_scipy(r, th, a):
    met = load_example("perturbed_cusp").metrics[0]
    z0 = polar(r, th)
    v0 = complex(math.cos(a), math.sin(a)) / math.sqrt(float(met.lam(z0)))
    T = 0.02
    path = geo.exp_map(met, z0, v0, T)
    if path.status != "ok":
        return
    ref = ivp_geodesic(met, z0, v0, T)
    assert abs(path.z[-1] - ref) <= 1e-8 * abs(ref)
    assert path.speed_residual() < 1e-8
    assert abs(path.point_at(T) - path.z[-1]) < 1e-12


def test_exp_map_radial_inward_hits_core(cusp_metric):
    v0 = -1 / math.sqrt(float(cusp_metric.lam(0.3)))
    path = geo.exp_map(cusp_metric, 0.3, v0, 1.0)
    assert path.status == "origin"
    assert path.length + path.core_error == pytest.approx(cusp_radial_distance(0.3), abs=1e-9)


def test_exp_map_leaves_the_disc(cusp_metric):
    v0 = 1 / math.sqrt(float(cusp_metric.lam(0.9)))
    assert geo.exp_map(cusp_metric, 0.9, v0, 5.0).status == "boundary"


def test_exp_map_argument_checks(cusp_metric):
    with pytest.raises(ValueError):
        geo.exp_map(cusp_metric, 0.3, 1.0, 0.1)
    with pytest.raises(DomainError):
        geo.exp_map(cusp_metric, 0, 1.0, 0.1)


def test_ray_path_length(cusp_metric):
    ray = geo.ray_path(cusp_metric, 1j, 0.2)
    assert ray.length == pytest.approx(0.2, abs=1e-12)
    assert ray.passes_through_origin and ray.z[0] == 0
    # radial ray: the end point sits on the imaginary axis at d(0, r) = 0.2
    r = abs(ray.z[-1])
    assert cusp_radial_distance(r) == pytest.approx(0.2, abs=1e-10)
    assert abs(ray.z[-1].real) < 1e-10


# ---------------------------------------------------------------- segments to the origin

@given(radii, angles)
def test_segment_to_origin_closed_form(r, th):
    met = load_example("cusp").metrics[0]
    seg = geo.segment_to_origin(met, polar(r, th))
    assert seg.length == pytest.approx(cusp_radial_distance(r), abs=1e-9)
    # rotational symmetry: the segment is radial
    assert geo.unoriented_angle(seg.normalization_tangent.direction, polar(1, th)) < 1e-6


def test_segment_to_origin_literal(cusp_metric):
    seg = geo.segment_to_origin(cusp_metric, 0.5)
    assert abs(seg.length - 0.28240741) <= 1e-6
    assert seg.start.z == 0.5 and seg.end.is_origin
    assert seg.passes_through_origin


@given(radii, angles)
def test_segment_to_origin_bounds_on_perturbed_cusp(r, th):
    met = load_example("perturbed_cusp").metrics[0]
    z = polar(r, th)
    seg = geo.segment_to_origin(met, z)
    radial = quad(lambda s: float(met.sqrt_lam(s * z / abs(z))), 0, r, epsabs=1e-14)[0]
    assert float(met.chord_to_origin(z)) - 1e-12 <= seg.length <= radial + 1e-9


def test_segment_to_origin_rejects_origin(cusp_metric):
    with pytest.raises(DomainError):
        geo.segment_to_origin(cusp_metric, 0)


def test_segment_matches_polyline_minimiser(pert):
    z = polar(0.4, 1.1)
    ode = geo.segment_to_origin(pert, z).length
    ref = polyline_distance(pert, z, 0j)
    assert abs(ref - ode) < 1e-4


# ---------------------------------------------------------------- connect

def test_connect_trivial(cusp_metric):
    res = geo.connect(cusp_metric, 0.3, 0.3)
    assert res.value == 0.0 and res.path.length == 0.0


def test_connect_regular_example(cusp_metric):
    res = geo.connect(cusp_metric, 0.3, polar(0.3, math.pi / 8))
    assert not res.through_origin
    assert res.path.start.z == 0.3
    assert abs(res.path.end.z - polar(0.3, math.pi / 8)) < 1e-9
    assert res.path.speed_residual() < 1e-8


def test_connect_through_origin_example(cusp_metric):
    res = geo.connect(cusp_metric, 0.3, polar(0.3, 3 * math.pi / 4))
    assert res.through_origin
    assert res.value == pytest.approx(2 * cusp_radial_distance(0.3), abs=1e-9)
    assert res.path.origin_parameter == pytest.approx(res.value / 2, abs=1e-9)


def test_connect_regular_matches_polyline_minimiser(cusp_metric, pert):
    for met, x, y in ((cusp_metric, 0.3, polar(0.3, math.pi / 8)), (pert, polar(0.35, 0.2), polar(0.2, 1.0))):
        res = geo.connect(met, x, y)
        ref = polyline_distance(met, x, y)
        assert abs(ref - res.value) < 5e-6


@given(st.floats(-0.45, 0.45), st.floats(-0.45, 0.45), st.floats(-0.45, 0.45), st.floats(-0.45, 0.45))
def test_flat_line_distance_is_euclidean(a, b, c, d):
    met = load_example("line").metrics[0]
    x, y = complex(a, b), complex(c, d)
    assert geo.connect(met, x, y).value == pytest.approx(abs(x - y), abs=1e-9)


@given(radii, angles, radii, angles)
def test_connect_is_symmetric(r1, t1, r2, t2):
    met = load_example("cusp").metrics[0]
    x, y = polar(r1, t1), polar(r2, t2)
    assert geo.connect(met, x, y).value == pytest.approx(geo.connect(met, y, x).value, abs=1e-8)


@given(radii, angles, radii, angles, radii, angles)
def test_triangle_inequality(r1, t1, r2, t2, r3, t3):
    met = load_example("perturbed_cusp").metrics[0]
    x, y, z = polar(r1, t1), polar(r2, t2), polar(r3, t3)
    d = lambda a, b: geo.connect(met, a, b).value  # noqa: E731
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-8


@given(radii, angles, radii, angles)
def test_distance_between_ambient_chord_and_mesh_path(r1, t1, r2, t2):
    met = load_example("cusp").metrics[0]
    x, y = polar(r1, t1), polar(r2, t2)
    from catcurve.curve_model import evaluate_phi
    chord = np.linalg.norm(evaluate_phi(met.branch, x) - evaluate_phi(met.branch, y))
    d = geo.connect(met, x, y).value
    assert chord <= d + 1e-10
    assert d <= cusp_radial_distance(r1) + cusp_radial_distance(r2) + 1e-9


def test_connect_outside_working_radius(cusp_metric):
    with pytest.raises(DomainError):
        geo.connect(cusp_metric, 0.3, 0.45, working_radius=0.4)


def test_path_reversal_and_samples(cusp_metric):
    res = geo.connect(cusp_metric, 0.3, polar(0.2, 0.5))
    back = res.path.reversed()
    assert back.start.z == res.path.end.z and back.end.z == res.path.start.z
    s = np.linspace(0, res.value, 7)
    fwd = res.path.states_at(s)[0]
    rev = back.states_at(res.value - s)[0]
    np.testing.assert_allclose(fwd, rev, atol=1e-9)
    rows = res.path.csv_rows()
    assert len(rows) == res.path.t.shape[0] and len(rows[0]) == 5
    assert len(res.path.ambient_rows()[0]) == 5


# ---------------------------------------------------------------- angles and limits

def test_angle_at_origin_examples(cusp_metric):
    assert geo.alexandrov_angle_at_origin(cusp_metric, 0.3, polar(0.3, math.pi / 4)) == pytest.approx(
        math.pi / 2, abs=1e-6)
    assert geo.alexandrov_angle_at_origin(cusp_metric, 0.3, polar(0.2, 3 * math.pi / 4)) == pytest.approx(
        math.pi, abs=1e-12)
    with pytest.raises(ValueError):
        geo.alexandrov_angle_at_origin(cusp_metric, 0, 0.3)


@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10), st.complex_numbers(min_magnitude=0.1,
                                                                                 max_magnitude=10))
def test_unoriented_angle_properties(u, v):
    a = geo.unoriented_angle(u, v)
    assert 0 <= a <= math.pi
    assert a == pytest.approx(geo.unoriented_angle(v, u), abs=1e-12)
    assert geo.unoriented_angle(u, u) == pytest.approx(0, abs=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_richardson_is_exact_for_polynomials(a, b, c):
    f = lambda t: a + b * t + c * t * t  # noqa: E731
    t = [0.1, 0.05, 0.025]
    est, prev = geo.richardson([f(s) for s in t])
    assert est == pytest.approx(a, abs=1e-9)


def test_richardson_custom_orders():
    f = lambda t: 2.0 + 3 * t ** 2 + t ** 4  # noqa: E731
    est, _ = geo.richardson([f(0.2), f(0.1), f(0.05)], orders=(2, 4))
    assert est == pytest.approx(2.0, abs=1e-12)
    assert geo.richardson([1.5]) == (1.5, 1.5)


def test_sin_half_angle_limit(cusp_metric, line_metric):
    t = [0.05, 0.025, 0.0125]
    assert geo.sin_half_angle_limit(cusp_metric, 0.0, math.pi / 4, t) == pytest.approx(
        math.sqrt(0.5), abs=1e-3)
    assert geo.sin_half_angle_limit(line_metric, 0.0, math.pi / 3, t) == pytest.approx(0.5, abs=1e-9)
    assert geo.sin_half_angle_limit(cusp_metric, 1.0, 1.0, t) == 0.0
    with pytest.raises(ValueError):
        geo.sin_half_angle_limit(cusp_metric, 0.0, math.pi / 2, t)
    with pytest.raises(ValueError):
        geo.sin_half_angle_limit(cusp_metric, 0.0, 0.1, [0.1, 0.05, 0.01])


# ---------------------------------------------------------------- regularity

def test_holder_seminorm(cusp_metric):
    seg = geo.segment_to_origin(cusp_metric, polar(0.3, 0.7)).reversed()
    h = [geo.holder_seminorm(seg, samples=n) for n in (50, 100, 200)]
    lip = [geo.holder_seminorm(seg, 1.0, samples=n) for n in (50, 100, 200)]
    assert abs(h[2] - h[1]) / h[1] < 0.05
    assert lip[2] / lip[0] > 1.9
    assert np.isfinite(geo.holder_seminorm(seg))
    with pytest.raises(ValueError):
        geo.holder_seminorm(seg, samples=2)


@given(st.floats(0.1, 0.45), angles)
def test_gradient_has_unit_metric_norm(r, th):
    met = load_example("perturbed_cusp").metrics[0]
    z = polar(r, th)
    g = geo.distance_gradient_check(met, z)
    assert g.rel_err < 1e-4
    # |grad d|_g = 1, i.e. the chart covector has Euclidean norm sqrt(lam)
    assert np.linalg.norm(g.analytic) == pytest.approx(math.sqrt(float(met.lam(z))), rel=1e-7)


def test_gradient_undefined_at_origin(cusp_metric):
    with pytest.raises(DomainError):
        geo.distance_gradient_check(cusp_metric, CurvePoint.origin())


def test_direction_maps(cusp_metric, pert):
    for met in (cusp_metric, pert):
        tab = geo.boundary_direction_maps(met, 0.3, 64)
        assert tab.ok.all()
        assert np.diff(tab.lift).min() >= -1e-6
        assert tab.lift_increment == pytest.approx(1.0, abs=1e-9)
        assert tab.ambient_winding == pytest.approx(2.0, abs=1e-9)
        assert len(tab.rows()) == 65


def test_winding_of_segments(cusp_metric):
    for y in (polar(0.3, 1.0), polar(0.3, 2.5), polar(0.1, -2.0)):
        res = geo.connect(cusp_metric, 0.3, y)
        assert abs(geo.winding_of_path(res.path)) < 1
