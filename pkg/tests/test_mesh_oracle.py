import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from catcurve import geodesics as geo
from catcurve import load_example
from catcurve.curve_model import CurvePoint, DomainError
from catcurve.mesh_oracle import (
    PathPolyline,
    build_mesh,
    dijkstra_distance,
    edge_length,
    winding_number,
)
from conftest import cusp_radial_distance, polar


@pytest.fixture(scope="module")
def cusp_mesh(cusp_metric):
    return build_mesh(cusp_metric, 40, 96, 0.85)


@pytest.fixture(scope="module")
def coarse_chain(cusp_metric):
    m0 = build_mesh(cusp_metric, 12, 24, 0.75)
    m1 = m0.refined()
    return m0, m1, m1.refined()


def _quad_length(metric, a, b):
    d = b - a
    f = lambda t: float(metric.sqrt_lam(a + t * d)) * abs(d)  # noqa: E731
    return quad(f, 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)[0]


@given(st.floats(0.05, 0.9), st.floats(0, 2 * math.pi), st.floats(0.05, 0.9), st.floats(0, 2 * math.pi))
def test_edge_length_matches_adaptive_quadrature(r1, t1, r2, t2):
    met = load_example("perturbed_cusp").metrics[0]
    a, b = polar(r1, t1), polar(r2, t2)
    ref = _quad_length(met, a, b)
    # chords far from 0 are smooth; near 0 the |z| kink limits the fixed rule
    assert edge_length(met, a, b, 16) == pytest.approx(ref, rel=2e-3, abs=1e-12)


def test_edge_length_radial_is_exact(cusp_metric):
    assert edge_length(cusp_metric, 0, 0.5) == pytest.approx(cusp_radial_distance(0.5), rel=1e-14)


def test_edge_length_through_origin_is_split(cusp_metric):
    # -0.3 -> 0.3 passes through 0: equals twice the radial length
    assert edge_length(cusp_metric, -0.3, 0.3) == pytest.approx(2 * cusp_radial_distance(0.3), rel=1e-14)


def test_edge_length_rejects_low_order(cusp_metric):
    with pytest.raises(ValueError):
        edge_length(cusp_metric, 0.1, 0.2, quad_order=1)
    assert edge_length(cusp_metric, 0.1, 0.1) == 0.0


@pytest.mark.parametrize("kwargs", [
    dict(rings=1, sectors=16, grading=0.8),
    dict(rings=4, sectors=4, grading=0.8),
    dict(rings=4, sectors=16, grading=1.0),
    dict(rings=4, sectors=16, grading=0.0),
])
def test_build_mesh_rejects_bad_parameters(cusp_metric, kwargs):
    with pytest.raises(ValueError):
        build_mesh(cusp_metric, **kwargs)


def test_mesh_structure(cusp_mesh):
    assert cusp_mesh.vertices.shape[0] == 1 + 40 * 96
    assert cusp_mesh.vertices[0] == 0
    assert cusp_mesh.is_connected()
    assert np.all(cusp_mesh.lengths > 0)
    # no duplicate edges
    key = {tuple(e) for e in np.sort(cusp_mesh.edges, axis=1)}
    assert len(key) == cusp_mesh.edges.shape[0]


def test_mesh_from_branch(cusp):
    mesh = build_mesh(cusp.branches[0], 5, 16, 0.7)
    assert mesh.metric.m == 2 and mesh.is_connected()


def test_mesh_dump(tmp_path, cusp_metric):
    mesh = build_mesh(cusp_metric, 3, 8, 0.5)
    p = tmp_path / "mesh.json"
    mesh.dump(p)
    doc = json.loads(p.read_text())
    assert len(doc["vertices"]) == 25
    assert len(doc["edges"]) == mesh.edges.shape[0]


def test_closed_form_radial_distance(cusp_mesh):
    # the radial line is a chain of mesh edges: the oracle is exact up to quadrature
    val, path = dijkstra_distance(cusp_mesh, 0j, 0.5)
    assert val == pytest.approx(0.28240740740740744, abs=1e-12)
    assert isinstance(path, PathPolyline)
    assert path.points[0].z == 0 and path.points[-1].z == 0.5


def test_trivial_query(cusp_mesh):
    val, path = dijkstra_distance(cusp_mesh, 0.2, 0.2)
    assert val == 0.0 and len(path.points) == 1


def test_off_vertex_query(cusp_mesh):
    val, path = dijkstra_distance(cusp_mesh, CurvePoint(0, 0.123 + 0.045j), 0.31j)
    assert np.isfinite(val) and val > 0
    assert path.points[0].z == 0.123 + 0.045j
    assert path.length == val


def test_refinement_is_monotone(coarse_chain):
    rng = np.random.default_rng(7)
    base = coarse_chain[0].vertices
    for _ in range(10):
        a, b = rng.choice(base[1:], 2, replace=False)
        vals = [dijkstra_distance(m, a, b)[0] for m in coarse_chain]
        assert vals[1] <= vals[0] + 1e-12
        assert vals[2] <= vals[1] + 1e-12


def test_refined_mesh_requires_nesting(cusp_metric, coarse_chain):
    with pytest.raises(ValueError):
        build_mesh(cusp_metric, 24, 48, 0.8, parent=coarse_chain[0])


def test_oracle_brackets_ode_distance(cusp_metric, cusp_mesh):
    rng = np.random.default_rng(11)
    for _ in range(6):
        x = polar(rng.uniform(0.05, 0.5), rng.uniform(0, 2 * np.pi))
        y = polar(rng.uniform(0.05, 0.5), rng.uniform(0, 2 * np.pi))
        d = geo.connect(cusp_metric, x, y).value
        oracle = dijkstra_distance(cusp_mesh, x, y)[0]
        assert d <= oracle + 1e-9
        assert oracle <= 1.2 * d


def test_flat_line_oracle(line_metric):
    mesh = build_mesh(line_metric, 30, 64, 0.85)
    val, _ = dijkstra_distance(mesh, 0.3, -0.2 + 0.1j)
    exact = abs(0.3 - (-0.2 + 0.1j))
    assert exact - 1e-12 <= val <= 1.1 * exact


# ---------------------------------------------------------------- winding

def test_circle_loop_winding():
    loop = 0.2 * np.exp(2j * np.pi * np.linspace(0, 1, 257))
    assert winding_number(loop) == pytest.approx(1.0, abs=1e-12)
    assert winding_number(loop[::-1]) == pytest.approx(-1.0, abs=1e-12)


def test_coarse_polygon_winding():
    # a square, four chords only: subdivision must follow them
    sq = np.array([1, 1j, -1, -1j, 1]) * (1 + 1j)
    assert winding_number(sq) == pytest.approx(1.0, abs=1e-12)


def test_branch_projection_multiplies_winding(cusp):
    loop = 0.3 * np.exp(2j * np.pi * np.linspace(0, 1, 65))
    assert winding_number(loop, cusp.branches[0]) == pytest.approx(2.0, abs=1e-12)


@given(st.integers(-3, 3), st.floats(0.1, 2.0))
def test_winding_counts_turns(k, r):
    pts = r * np.exp(2j * np.pi * k * np.linspace(0, 1, 40 * max(abs(k), 1) + 1))
    assert winding_number(pts) == pytest.approx(k, abs=1e-9)


def test_winding_undefined_through_zero():
    with pytest.raises(DomainError):
        winding_number(np.array([-1, 1], dtype=complex))
    with pytest.raises(DomainError):
        winding_number(np.array([0, 1], dtype=complex))


def test_winding_of_polyline(cusp_mesh):
    _, path = dijkstra_distance(cusp_mesh, 0.3, polar(0.25, 0.6))
    assert abs(winding_number(path)) < 0.5
