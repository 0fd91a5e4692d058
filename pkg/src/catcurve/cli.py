"""Command-line interface: ``catcurve <subcommand> SPEC ...``.

SPEC is a JSON curve spec path or the name of a bundled example.  Points are
chart coordinates ``branch:re,im`` or ``branch:r@theta`` (branch defaults to 0).
All numbers are printed in scientific notation with 9 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import fields

import numpy as np

from . import EXAMPLES, __version__
from . import comparison as cmp
from . import geodesics as geo
from . import mesh_oracle as mo
from .curve_model import CurvePoint, CurveSpecError, DomainError, curvature_sup_estimate
from .verification import EXPERIMENTS, ExperimentConfig, resolve_curve, run_suite


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex):
        return f"{fmt(x.real)},{fmt(x.imag)}"
    x = float(x)
    if x == 0:
        x = 0.0  # no negative zero
    return f"{x:.8e}"


def _point(text: str) -> CurvePoint:
    try:
        return CurvePoint.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(args, rows: list, header: list):
    """Write rows as CSV or JSON to --out or stdout."""
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump([dict(zip(header, [fmt(v) for v in r])) for r in rows], out, indent=1)
            out.write("\n")
        else:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(header)
            w.writerows([[fmt(v) for v in r] for r in rows])
    finally:
        if args.out:
            out.close()


def _kappa_sup(metric) -> float:
    R = metric.domain_radius
    return float(curvature_sup_estimate(metric, (0.01 * R, R))) + 0.0


def cmd_info(args, curve) -> int:
    print(f"ambient dimension n={curve.ambient.n}, branches={len(curve.branches)}")
    for i, (b, met) in enumerate(zip(curve.branches, curve.metrics)):
        degs = [len(a) - 1 for a in b.psi]
        name = f" ({b.name})" if b.name else ""
        print(f"branch {i}{name}: m={b.m}, n={b.n}, psi degrees={degs}, "
              f"domain_radius={fmt(b.domain_radius)}, kappa_sup={fmt(_kappa_sup(met))}")
    wr = args.working_radius or curve.default_working_radius()
    print(f"working_radius={fmt(wr)}")
    return 0


def _check_branch(curve, *points):
    for p in points:
        if p.branch_index >= len(curve.branches):
            raise DomainError(f"point {p} refers to branch {p.branch_index}, "
                              f"but the curve has {len(curve.branches)} branch(es)")


def _distance(args, curve, x, y):
    _check_branch(curve, x, y)
    wr = args.working_radius or curve.default_working_radius()
    for p in (x, y):
        if abs(p.z) > wr * (1 + 1e-9):
            raise DomainError(f"|z| = {abs(p.z):.6g} lies outside the working radius {wr:.6g}")
    return cmp.glued_distance(cmp.GluedSpace(curve), x, y)


def cmd_dist(args, curve) -> int:
    x, y = args.x, args.y
    res = _distance(args, curve, x, y)
    print(f"distance={fmt(res.value)}")
    print(f"through_origin={fmt(res.through_origin)}")
    print(f"regular_candidate={fmt(res.candidates.get('regular'))}")
    print(f"through_origin_candidate={fmt(res.candidates.get('through_origin'))}")
    if res.tangent_angle is not None:
        print(f"normalization_tangent_angle={fmt(res.tangent_angle)}")
    if res.tie:
        print("tie=true")
    if args.oracle and x.branch_index == y.branch_index:
        mesh = mo.build_mesh(curve.metrics[x.branch_index], args.mesh_rings, args.mesh_sectors, args.mesh_grading)
        val, _ = mo.dijkstra_distance(mesh, x.z, y.z)
        print(f"oracle={fmt(val)}")
    if args.out:
        _emit(args, _path_rows(res.path), _PATH_HEADER)
    return 0


_PATH_HEADER = ["t", "branch", "re_z", "im_z", "re_zdot", "im_zdot"]


def _path_rows(path):
    return [(t, int(b), z.real, z.imag, v.real, v.imag)
            for t, b, z, v in zip(path.t, path.branch, path.z, path.zdot)]


def cmd_geodesic(args, curve) -> int:
    res = _distance(args, curve, args.x, args.y)
    path = res.path
    if args.ambient:
        rows = path.ambient_rows()
        n = curve.ambient.n
        header = ["t"] + [f"{p}_phi{j + 1}" for j in range(n) for p in ("re", "im")]
    else:
        rows, header = _path_rows(path), _PATH_HEADER
    _emit(args, rows, header)
    return 0


def cmd_angle(args, curve) -> int:
    x, y = args.x, args.y
    _check_branch(curve, x, y)
    if x.branch_index != y.branch_index:
        print(f"angle_at_origin={fmt(math.pi)}  (different branches)")
        return 0
    met = curve.metrics[x.branch_index]
    ang = geo.alexandrov_angle_at_origin(met, x.z, y.z)
    print(f"angle_at_origin={fmt(ang)}")
    tx = geo.segment_to_origin(met, x.z).normalization_tangent
    ty = geo.segment_to_origin(met, y.z).normalization_tangent
    print(f"normalization_tangents={fmt(tx.angle)} {fmt(ty.angle)}")
    if args.estimate:
        t0 = 0.25 * min(geo.segment_to_origin(met, p.z).length for p in (x, y))
        est = cmp.alexandrov_angle_estimate(curve, CurvePoint.origin(), x, y, [t0 / 2 ** k for k in range(3)])
        print(f"limit_estimate={fmt(est)}")
    return 0


def cmd_cat_check(args, curve) -> int:
    pts = (args.x, args.y, args.z)
    _check_branch(curve, *pts)
    kappa = args.kappa if args.kappa is not None else _kappa_sup(curve.metrics[0])
    v = cmp.cat_check_triangle(curve, *pts, kappa, args.samples)
    print(f"kappa={fmt(kappa)}")
    print(f"satisfied={fmt(v.satisfied)}")
    print(f"worst_margin={fmt(v.worst_margin)}")
    print(f"samples_used={v.samples_used}")
    if v.witness:
        (i, s), (j, t) = v.witness
        print(f"witness=side{i}@{fmt(s)} side{j}@{fmt(t)}")
    for ac in v.angle_conditions:
        print(f"angle_{ac.vertex}: alexandrov={fmt(ac.alexandrov)} comparison={fmt(ac.comparison)} "
              f"margin={fmt(ac.margin)} ok={fmt(ac.ok)} route={ac.route}")
    return 0 if v.satisfied else 1


def cmd_verify(args, curve) -> int:
    overrides = {"curve": args.spec, "mesh_rings": args.mesh_rings, "mesh_sectors": args.mesh_sectors,
                 "mesh_grading": args.mesh_grading, "seed": args.seed, "kappa": args.kappa,
                 "working_radius": args.working_radius}
    if args.experiments:
        overrides["experiments"] = tuple(s.strip() for s in args.experiments.split(",") if s.strip())
    for item in args.set or ():
        key, _, val = item.partition("=")
        known = {f.name: f.type for f in fields(ExperimentConfig)}
        if key not in known:
            raise SystemExit(f"catcurve verify: unknown config field {key!r}")
        overrides[key] = float(val) if "." in val or "e" in val.lower() else int(val)
    config = ExperimentConfig(**overrides)
    report = run_suite(config, curve, out_dir=args.out)
    text = report.to_text()
    # runtimes vary between runs; keep stdout reproducible unless asked
    if not args.timings:
        text = "\n".join(_strip_time(line) for line in text.splitlines()) + "\n"
    sys.stdout.write(text)
    return 0 if report.passed else 1


def _strip_time(line: str) -> str:
    parts = line.split("  ")
    return "  ".join(p for p in parts if not p.startswith("time="))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catcurve", description="Distances, geodesics and CAT(kappa) checks on singular complex curves.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", help=f"curve spec JSON path or bundled example ({', '.join(EXAMPLES)})")
    common.add_argument("--mesh-rings", type=int, default=40)
    common.add_argument("--mesh-sectors", type=int, default=96)
    common.add_argument("--mesh-grading", type=float, default=0.85)
    common.add_argument("--working-radius", type=float, default=None)
    common.add_argument("--kappa", type=float, default=None, help="override the curvature bound")
    common.add_argument("--seed", type=int, default=ExperimentConfig.seed)
    common.add_argument("--out", default=None, help="output file (directory for verify)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("info", parents=[common], help="summarise a curve spec")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("dist", parents=[common], help="intrinsic distance between two points")
    s.add_argument("x", type=_point)
    s.add_argument("y", type=_point)
    s.add_argument("--oracle", action="store_true", help="also print the Dijkstra mesh value")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("geodesic", parents=[common], help="emit the shortest path as CSV/JSON")
    s.add_argument("x", type=_point)
    s.add_argument("y", type=_point)
    s.add_argument("--ambient", action="store_true", help="emit phi(z) coordinates instead of chart data")
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("angle", parents=[common], help="angle at the origin between segments to x and y")
    s.add_argument("x", type=_point)
    s.add_argument("y", type=_point)
    s.add_argument("--estimate", action="store_true", help="also run the limit estimator")
    s.set_defaults(func=cmd_angle)

    s = sub.add_parser("cat-check", parents=[common], help="CAT(kappa) comparison for one triangle")
    s.add_argument("x", type=_point)
    s.add_argument("y", type=_point)
    s.add_argument("z", type=_point)
    s.add_argument("--samples", type=int, default=12, help="samples per side")
    s.set_defaults(func=cmd_cat_check)

    s = sub.add_parser("verify", parents=[common], help="run the experiment suite")
    s.add_argument("--experiments", default=None,
                   help="comma-separated subset of: " + ", ".join(n for n, _ in EXPERIMENTS))
    s.add_argument("--set", action="append", metavar="FIELD=VALUE", help="override a config field")
    s.add_argument("--timings", action="store_true", help="include runtimes in the printed report")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        curve = resolve_curve(args.spec)
    except (CurveSpecError, OSError) as exc:
        print(f"catcurve: error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, curve)
    except (DomainError, ValueError, KeyError, geo.ShootingError) as exc:
        print(f"catcurve: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
