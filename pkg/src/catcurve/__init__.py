"""Intrinsic geometry of singular complex curves: distances, geodesics and CAT(kappa) checks."""

from importlib import resources

from .curve_model import (
    AmbientMetric,
    CurvePoint,
    MultiBranchCurve,
    NormalizedBranch,
    load_curve_spec,
    parse_curve_spec,
    single_branch,
)

__version__ = "0.1.0"

EXAMPLES = ("cusp", "line", "perturbed_cusp", "sextic", "node")


def load_example(name: str) -> MultiBranchCurve:
    """Load a bundled curve spec by name (see EXAMPLES)."""
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    with resources.as_file(resources.files(__package__) / "data" / f"{name}.json") as path:
        return load_curve_spec(path)


__all__ = [
    "AmbientMetric",
    "CurvePoint",
    "MultiBranchCurve",
    "NormalizedBranch",
    "load_curve_spec",
    "parse_curve_spec",
    "single_branch",
    "load_example",
    "EXAMPLES",
]
