"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import time

import pytest

from catcurve import load_example
from catcurve.comparison import GluedSpace
from catcurve.curve_model import CurvePoint, gaussian_curvature
from catcurve.verification import CRITERIA, ExperimentConfig, run_experiment


@pytest.fixture
def verdict(capsys):
    def emit(number, title, passed, detail, started):
        with capsys.disabled():
            status = "PASS" if passed else "FAIL"
            print(f"\n{status} criterion {number:>2} {title}: {detail} ({time.perf_counter() - started:.1f}s)")
        assert passed, detail
    return emit


def suite_entry(number, curve="cusp", **overrides):
    return run_experiment(CRITERIA[number], ExperimentConfig(curve=curve, **overrides))


def test_criterion_01_curvature_cross_check(verdict):
    t = time.perf_counter()
    res = suite_entry(1)
    k = gaussian_curvature(load_example("cusp").metrics[0], 0.5)
    literal = abs(k + 1.179648) <= 1e-8 * 1.179648
    verdict(1, "curvature cross-check", res.passed and literal,
            f"{res.summary}; K(0.5) = {k:.9f}", t)


def test_criterion_02_closed_form_distance(verdict):
    t = time.perf_counter()
    res = suite_entry(2)
    ode, dij = dict(res.rows)["ode"], dict(res.rows)["dijkstra"]
    literal = abs(ode - 0.28240741) <= 1e-6 and abs(dij - 0.28240741) <= 1e-3
    verdict(2, "closed-form distance", res.passed and literal, res.summary, t)


@pytest.mark.slow
def test_criterion_03_cat_certificate(verdict):
    t = time.perf_counter()
    res = suite_entry(3)
    random_rows = [r for r in res.rows if r[0] == "random"]
    verdict(3, "CAT(kappa) certificate", res.passed and len(random_rows) == 200, res.summary, t)


def test_criterion_04_angle_at_origin(verdict):
    t = time.perf_counter()
    res = suite_entry(4)
    seps = sorted(round(r[0] / math.pi, 12) for r in res.rows)
    verdict(4, "angle at origin", res.passed and seps == [0.125, 0.25, 0.375], res.summary, t)


def test_criterion_05_sin_half_angle_limit(verdict):
    t = time.perf_counter()
    cusp = suite_entry(5)
    line = suite_entry(5, curve="line")
    ok = (cusp.passed and abs(cusp.rows[0][1] - 0.70711) <= 1e-3
          and line.passed and abs(line.rows[0][1] - 0.5) <= 1e-3)
    verdict(5, "sin(angle/2) limit", ok, f"cusp: {cusp.summary}; line: {line.summary}", t)


def test_criterion_06_through_origin_criterion(verdict):
    t = time.perf_counter()
    res = suite_entry(6)
    # 0.01 rad steps across pi/2 +- 0.3 at chart radius 0.6 * working radius = 0.3
    ok = res.passed and len(res.rows) == 61
    verdict(6, "through-origin criterion", ok, res.summary, t)


def test_criterion_07_gradient(verdict):
    t = time.perf_counter()
    res = suite_entry(7)
    verdict(7, "gradient of d(0, .)", res.passed and len(res.rows) == 20, res.summary, t)


def test_criterion_08_convexity(verdict):
    t = time.perf_counter()
    res = suite_entry(8)
    verdict(8, "convexity", res.passed and len(res.rows) == 50, res.summary, t)


def test_criterion_09_winding_bound(verdict):
    t = time.perf_counter()
    res = suite_entry(9)
    verdict(9, "winding bound", res.passed, res.summary, t)


def test_criterion_10_holder_stability(verdict):
    t = time.perf_counter()
    res = suite_entry(10)
    verdict(10, "Hoelder stability", res.passed, res.summary, t)


def test_criterion_11_direction_maps(verdict):
    t = time.perf_counter()
    cusp = suite_entry(11)
    pert = suite_entry(11, curve="perturbed_cusp")
    verdict(11, "lift monotonicity and degree", cusp.passed and pert.passed,
            f"cusp: {cusp.summary}; perturbed: {pert.summary}", t)


def test_criterion_12_branching(verdict):
    t = time.perf_counter()
    res = suite_entry(12)
    distinct = len({r[1] for r in res.rows})
    verdict(12, "branching / no lower bound", res.passed and distinct == 8, res.summary, t)


def test_criterion_13_glued_space(verdict):
    t = time.perf_counter()
    res = suite_entry(13, curve="node")
    node = load_example("node")
    d = GluedSpace(node).distance(CurvePoint(0, 0.3), CurvePoint(1, 0.4)).value
    ok = res.passed and abs(d - 0.7) <= 1e-12 and len(res.rows) == 50
    verdict(13, "glued space", ok, f"{res.summary}; d = {d:.15f}", t)


def test_criterion_14_sector_convexity(verdict):
    t = time.perf_counter()
    res = suite_entry(14)
    spread_ok = all(abs(r[2]) < 1 / 4 for r in res.rows)
    verdict(14, "sector convexity", res.passed and spread_ok and len(res.rows) == 50, res.summary, t)


def test_every_criterion_has_a_test():
    names = {n for n in globals() if n.startswith("test_criterion_")}
    assert {int(n.split("_")[2]) for n in names} == set(CRITERIA)
