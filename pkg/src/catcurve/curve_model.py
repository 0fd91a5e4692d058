"""Singular curve branches given by their normalisation, and the pullback metric.

A branch is ``phi(z) = z**m * psi(z)`` with ``psi`` a tuple of polynomials in
normal form (``psi_1 == 1``, ``psi_j(0) == 0`` for ``j > 1``).  The ambient
metric is a constant Hermitian matrix ``H``, so the ambient space is flat and
Kaehler and the Gauss equation reads ``K = -2 |B|^2``.
"""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from . import _kernels

__all__ = [
    "AmbientMetric",
    "NormalizedBranch",
    "MultiBranchCurve",
    "CurvePoint",
    "ConformalMetric",
    "CurvatureSweep",
    "CurveSpecError",
    "DomainError",
    "SingularPointError",
    "evaluate_phi",
    "conformal_factor",
    "conformal_factor_from_R",
    "gaussian_curvature",
    "second_fundamental_form_norm",
    "curvature_sup_estimate",
    "load_curve_spec",
    "parse_curve_spec",
    "curve_to_spec",
]


class CurveSpecError(ValueError):
    """Malformed or non-normalised curve description."""


class DomainError(ValueError):
    """A chart point outside the branch's disc, or a forbidden zero."""


class SingularPointError(ValueError):
    """Quantity requested at the singular point z = 0."""


def _hnorm2(H, v):
    # v: (n, ...) complex
    return np.real(np.einsum("i...,ij,j...->...", np.conj(v), H, v))


@dataclass(frozen=True, eq=False)
class AmbientMetric:
    """Constant Hermitian positive definite metric on C^n."""

    H: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        if H.shape[0] != H.shape[1]:
            raise CurveSpecError(f"hermitian matrix must be square, got {H.shape}")
        if not np.allclose(H, H.conj().T, rtol=0, atol=1e-12):
            raise CurveSpecError("hermitian matrix is not conjugate-symmetric")
        eig = np.linalg.eigvalsh(H)
        if eig.min() <= 0:
            raise CurveSpecError(f"hermitian matrix is not positive definite (min eigenvalue {eig.min():.3g})")
        H = 0.5 * (H + H.conj().T)
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @classmethod
    def identity(cls, n: int) -> "AmbientMetric":
        return cls(np.eye(n, dtype=complex))

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True, eq=False)
class NormalizedBranch:
    """One analytic branch ``phi(z) = z**m psi(z)``.

    ``psi`` holds ascending coefficient arrays, one per ambient coordinate.
    ``frame`` is an optional invertible n x n matrix mapping the branch's normal
    form coordinates into the shared ambient coordinates (needed when several
    branches with different tangent lines share one ambient space).
    """

    m: int
    psi: tuple
    domain_radius: float = 1.0
    frame: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise CurveSpecError(f"multiplicity m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        if not 0 < self.domain_radius <= 1:
            raise CurveSpecError(f"domain_radius must lie in (0, 1], got {self.domain_radius}")
        coeffs = []
        for c in self.psi:
            a = np.atleast_1d(np.asarray(c, dtype=complex))
            a = np.trim_zeros(a, "b") if np.any(a) else np.zeros(1, complex)
            a.setflags(write=False)
            coeffs.append(a)
        if not coeffs:
            raise CurveSpecError("psi must have at least one coordinate")
        first = coeffs[0]
        if not (first.shape[0] == 1 and first[0] == 1):
            raise CurveSpecError(
                "psi_1 must be the constant series 1 (normal form phi(z) = z^m psi(z), "
                "psi_1 = 1, psi_j(0) = 0 for j > 1)")
        for j, a in enumerate(coeffs[1:], start=2):
            if a[0] != 0:
                raise CurveSpecError(f"psi_{j}(0) must vanish in normal form, got {a[0]}")
        object.__setattr__(self, "psi", tuple(coeffs))
        if self.frame is not None:
            A = np.asarray(self.frame, dtype=complex)
            if A.shape != (len(coeffs), len(coeffs)):
                raise CurveSpecError(f"frame must be {len(coeffs)}x{len(coeffs)}")
            if abs(np.linalg.det(A)) < 1e-12:
                raise CurveSpecError("frame matrix is singular")
            A.setflags(write=False)
            object.__setattr__(self, "frame", A)
        self._check_immersion()

    @property
    def n(self) -> int:
        return len(self.psi)

    def phi_coefficients(self, deriv: int = 0) -> np.ndarray:
        """Ascending coefficients of the k-th derivative of phi, shape (n, D)."""
        rows = []
        for a in self.psi:
            c = np.concatenate([np.zeros(self.m, complex), a])
            for _ in range(deriv):
                c = P.polyder(c) if c.shape[0] > 1 else np.zeros(1, complex)
            rows.append(c)
        width = max(r.shape[0] for r in rows)
        out = np.zeros((self.n, width), complex)
        for j, r in enumerate(rows):
            out[j, : r.shape[0]] = r
        return out

    def R_coefficients(self) -> np.ndarray:
        """Coefficients of R with phi'(z) = m z^(m-1) (e_1 + z R(z)).

        R(z) = (psi(z) - psi(0)) / z + psi'(z) / m.
        """
        rows = []
        for a in self.psi:
            shifted = a[1:] if a.shape[0] > 1 else np.zeros(1, complex)
            d = P.polyder(a) / self.m if a.shape[0] > 1 else np.zeros(1, complex)
            rows.append(P.polyadd(shifted, d))
        width = max(r.shape[0] for r in rows)
        out = np.zeros((self.n, width), complex)
        for j, r in enumerate(rows):
            out[j, : r.shape[0]] = r
        return out

    def v_coefficients(self, deriv: int = 0) -> np.ndarray:
        """v(z) = m psi(z) + z psi'(z), so that phi'(z) = z^(m-1) v(z)."""
        rows = []
        for a in self.psi:
            c = self.m * a
            if a.shape[0] > 1:
                c = P.polyadd(c, P.polymulx(P.polyder(a)))
            for _ in range(deriv):
                c = P.polyder(c) if c.shape[0] > 1 else np.zeros(1, complex)
            rows.append(c)
        width = max(r.shape[0] for r in rows)
        out = np.zeros((self.n, width), complex)
        for j, r in enumerate(rows):
            out[j, : r.shape[0]] = r
        return out

    def _check_immersion(self, grid: int = 64):
        # phi' = z^(m-1) v(z); v(0) = m e_1, so it suffices that v stays nonzero.
        rho = self.domain_radius * np.arange(1, grid + 1) / grid
        theta = 2 * np.pi * np.arange(grid) / grid
        z = (rho[:, None] * np.exp(1j * theta[None, :])).ravel()
        v = _polyval_rows(self.v_coefficients(), z)
        norm = np.sqrt(np.sum(np.abs(v) ** 2, axis=0))
        if norm.min() < 1e-10:
            bad = z[np.argmin(norm)]
            raise CurveSpecError(f"phi' vanishes near z = {bad:.4g}: branch is not immersed off the origin")


def _polyval_rows(C, z):
    z = np.asarray(z, dtype=complex)
    return np.stack([P.polyval(z, c) for c in C])


@dataclass(frozen=True, eq=False)
class MultiBranchCurve:
    branches: tuple
    ambient: AmbientMetric
    working_radius: float | None = None

    def __post_init__(self):
        if not self.branches:
            raise CurveSpecError("a curve needs at least one branch")
        object.__setattr__(self, "branches", tuple(self.branches))
        for b in self.branches:
            if b.n != self.ambient.n:
                raise CurveSpecError(f"branch has {b.n} coordinates but ambient_dim is {self.ambient.n}")

    def metric(self, index: int = 0) -> "ConformalMetric":
        return self.metrics[index]

    @property
    def metrics(self) -> tuple:
        cached = self.__dict__.get("_metrics")
        if cached is None:
            cached = tuple(ConformalMetric(b, self.ambient) for b in self.branches)
            object.__setattr__(self, "_metrics", cached)
        return cached

    def default_working_radius(self) -> float:
        if self.working_radius is not None:
            return self.working_radius
        return 0.25 * min(b.domain_radius for b in self.branches)


@dataclass(frozen=True)
class CurvePoint:
    """A point of the curve addressed in a branch chart; the origin is shared."""

    branch_index: int
    z: complex

    def __post_init__(self):
        z = complex(self.z)
        object.__setattr__(self, "z", z)
        if z == 0:
            object.__setattr__(self, "branch_index", 0)

    @property
    def is_origin(self) -> bool:
        return self.z == 0

    @classmethod
    def origin(cls) -> "CurvePoint":
        return cls(0, 0j)

    @classmethod
    def parse(cls, text: str) -> "CurvePoint":
        """Parse ``"branch:re,im"`` or polar ``"branch:r@theta"`` (branch prefix optional)."""
        text = text.strip()
        branch = 0
        if ":" in text:
            head, text = text.split(":", 1)
            branch = int(head)
        if "@" in text:
            r, th = text.split("@", 1)
            return cls(branch, float(r) * cmath.exp(1j * float(th)))
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) == 1:
            z = complex(float(parts[0]), 0.0)
        elif len(parts) == 2:
            z = complex(float(parts[0]), float(parts[1]))
        else:
            raise ValueError(f"cannot parse point {text!r}; expected 'branch:re,im'")
        return cls(branch, z)


class ConformalMetric:
    """Pullback metric ``lam(z) |dz|^2`` of one branch into (C^n, H)."""

    def __init__(self, branch: NormalizedBranch, ambient: AmbientMetric):
        self.branch = branch
        self.ambient = ambient
        H = ambient.H
        if branch.frame is not None:
            H = branch.frame.conj().T @ H @ branch.frame
        self.H = np.ascontiguousarray(H)
        self.m = branch.m
        self.domain_radius = branch.domain_radius
        width = branch.phi_coefficients(1).shape[1]
        self._C = [np.ascontiguousarray(_pad(branch.phi_coefficients(k), width)) for k in (1, 2, 3)]
        self._R = branch.R_coefficients()
        self._v = branch.v_coefficients()
        self._v1 = branch.v_coefficients(1)
        self._phi = branch.phi_coefficients(0)
        for c in self._C:
            c.setflags(write=False)
        e1 = np.zeros(branch.n, complex)
        e1[0] = 1
        self.e1_norm = float(np.sqrt(_hnorm2(self.H, e1)))
        # H = G^* G with G the conjugate transpose of the Cholesky factor
        self._G = np.ascontiguousarray(np.linalg.cholesky(self.H).conj().T)

    @property
    def singular(self) -> bool:
        return self.m > 1

    @property
    def kernel_args(self):
        return self._C[0], self._C[1], self._C[2], self._G

    def check(self, z):
        z = complex(z)
        if abs(z) > self.domain_radius * (1 + 1e-12):
            raise DomainError(f"|z| = {abs(z):.6g} exceeds domain_radius {self.domain_radius}")
        return z

    def lam(self, z):
        """Vectorised conformal factor |phi'(z)|_H^2 (no domain checks)."""
        f = _polyval_rows(self._C[0], z)
        return _hnorm2(self.H, f)

    def sqrt_lam(self, z):
        return np.sqrt(self.lam(z))

    def chord_to_origin(self, z):
        """Ambient distance |phi(z) - phi(0)|_H, a lower bound for d(0, z)."""
        return np.sqrt(_hnorm2(self.H, _polyval_rows(self._phi, z)))

    def terms(self, z: complex):
        """(lam, d/dz log lam, d^2/dz^2 log lam, d^2/dz dzbar log lam)."""
        return _kernels.metric_terms(*self.kernel_args, complex(z))

    def dlog_lam(self, z):
        """Vectorised d/dz log lam = <f, f'>/<f, f>."""
        f = _polyval_rows(self._C[0], z)
        f1 = _polyval_rows(self._C[1], z)
        num = np.einsum("i...,ij,j...->...", np.conj(f), self.H, f1)
        return num / _hnorm2(self.H, f)


def _pad(C, width):
    out = np.zeros((C.shape[0], width), complex)
    out[:, : C.shape[1]] = C
    return out


def evaluate_phi(branch: NormalizedBranch, z: complex) -> np.ndarray:
    """phi(z) = z^m psi(z) in the branch's normal-form coordinates (frame applied)."""
    z = complex(z)
    if abs(z) > branch.domain_radius * (1 + 1e-12):
        raise DomainError(f"|z| = {abs(z):.6g} exceeds domain_radius {branch.domain_radius}")
    psi = np.array([_kernels.horner(np.ascontiguousarray(a), z) for a in branch.psi])
    out = z ** branch.m * psi
    if branch.frame is not None:
        out = branch.frame @ out
    return out


def conformal_factor(metric: ConformalMetric, z: complex, with_flag: bool = False):
    """lam(z) = phi'(z)^* H phi'(z).

    At z = 0 the value is exactly 0 for m > 1 (the singular point); with
    ``with_flag`` the pair (value, is_singular_point) is returned.
    """
    z = metric.check(z)
    if z == 0 and metric.m > 1:
        return (0.0, True) if with_flag else 0.0
    val = float(metric.lam(z))
    return (val, False) if with_flag else val


def conformal_factor_from_R(metric: ConformalMetric, z: complex) -> float:
    """Second route: m^2 |z|^(2(m-1)) |e_1 + z R(z)|_H^2."""
    z = metric.check(z)
    R = _polyval_rows(metric._R, z)
    u = z * R
    u[0] += 1
    return float(metric.m ** 2 * abs(z) ** (2 * (metric.m - 1)) * _hnorm2(metric.H, u))


def gaussian_curvature(metric: ConformalMetric, z: complex, method: str = "analytic",
                       h: float | None = None) -> float:
    """Gaussian curvature K = -(1/(2 lam)) Laplacian(log lam) at z != 0.

    ``method="analytic"`` differentiates the polynomial data exactly;
    ``method="fd"`` uses a 5-point Laplacian of log lam with step
    ``h = 1e-5 |z|`` unless given.
    """
    z = metric.check(z)
    if z == 0:
        raise SingularPointError("curvature is not defined at the origin of the chart")
    if method == "analytic":
        lam, _, _, gzb = metric.terms(z)
        return float(-2.0 * gzb / lam)
    if method == "fd":
        h = 1e-5 * abs(z) if h is None else h
        # 9-point stencil (4th order) on log lam
        offs = np.array([0, 1, -1, 2, -2])
        w = np.array([-30, 16, 16, -1, -1]) / (12 * h * h)
        pts = np.concatenate([z + offs * h, z + 1j * offs * h])
        loglam = np.log(metric.lam(pts))
        lap = w @ loglam[:5] + w @ loglam[5:]
        return float(-lap / (2 * metric.lam(z)))
    raise ValueError(f"unknown method {method!r}")


def second_fundamental_form_norm(branch: NormalizedBranch, ambient: AmbientMetric, z: complex) -> float:
    """|B| at phi(z) via |(v')^perp|_H / (|z|^(m-1) |v|_H^2), v = m psi + z psi'."""
    z = complex(z)
    if abs(z) > branch.domain_radius * (1 + 1e-12):
        raise DomainError(f"|z| = {abs(z):.6g} exceeds domain_radius {branch.domain_radius}")
    if z == 0:
        raise SingularPointError("second fundamental form is not defined at the origin of the chart")
    H = ambient.H
    if branch.frame is not None:
        H = branch.frame.conj().T @ H @ branch.frame
    v = _polyval_rows(branch.v_coefficients(), z)
    dv = _polyval_rows(branch.v_coefficients(1), z)
    vv = _hnorm2(H, v)
    coef = (np.conj(v) @ H @ dv) / vv
    perp = dv - coef * v
    return float(np.sqrt(_hnorm2(H, perp)) / (abs(z) ** (branch.m - 1) * vv))


@dataclass(frozen=True)
class CurvatureSweep:
    value: float
    argmax: complex
    radii: np.ndarray = field(repr=False)
    angles: np.ndarray = field(repr=False)

    def __float__(self):
        return self.value


def curvature_sup_estimate(metric: ConformalMetric, annulus: tuple = (0.01, 1.0),
                           samples: int | tuple = 64) -> CurvatureSweep:
    """Max of K over a log-radial x angular grid on the closed annulus.

    The grid includes both radii; the angular grid is uniform.
    """
    r_in, r_out = annulus
    if isinstance(samples, int):
        nr = na = samples
    else:
        nr, na = samples
    if nr < 1 or na < 1:
        raise ValueError("curvature sweep needs a nonempty grid")
    if not 0 < r_in < r_out <= metric.domain_radius * (1 + 1e-12):
        raise ValueError(f"annulus {annulus} must satisfy 0 < r_in < r_out <= {metric.domain_radius}")
    radii = np.geomspace(r_in, r_out, nr) if nr > 1 else np.array([r_out])
    angles = 2 * np.pi * np.arange(na) / na
    best, arg = -np.inf, 0j
    for r in radii:
        for a in angles:
            z = r * np.exp(1j * a)
            k = gaussian_curvature(metric, z)
            if k > best:
                best, arg = k, z
    return CurvatureSweep(float(best), complex(arg), radii, angles)


# ----------------------------------------------------------------------------
# curve-spec files


def _cplx(x, where):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(t, (int, float)) for t in x):
        return complex(x[0], x[1])
    raise CurveSpecError(f"{where}: expected a number or [re, im], got {x!r}")


def parse_curve_spec(data: dict) -> MultiBranchCurve:
    """Build a curve from the decoded JSON curve-spec structure."""
    if not isinstance(data, dict):
        raise CurveSpecError("top level: expected an object")
    for key in ("ambient_dim", "branches"):
        if key not in data:
            raise CurveSpecError(f"top level: missing field {key!r}")
    n = data["ambient_dim"]
    if not isinstance(n, int) or n < 1:
        raise CurveSpecError(f"ambient_dim: expected a positive integer, got {n!r}")
    herm = data.get("hermitian", "identity")
    if herm == "identity":
        ambient = AmbientMetric.identity(n)
    else:
        if not isinstance(herm, list) or len(herm) != n:
            raise CurveSpecError(f"hermitian: expected 'identity' or an {n}x{n} matrix")
        rows = []
        for i, row in enumerate(herm):
            if not isinstance(row, list) or len(row) != n:
                raise CurveSpecError(f"hermitian[{i}]: expected {n} entries")
            rows.append([_cplx(x, f"hermitian[{i}][{j}]") for j, x in enumerate(row)])
        try:
            ambient = AmbientMetric(np.array(rows))
        except CurveSpecError as exc:
            raise CurveSpecError(f"hermitian: {exc}") from None
    branches = data["branches"]
    if not isinstance(branches, list) or not branches:
        raise CurveSpecError("branches: expected a nonempty list")
    out = []
    for b, br in enumerate(branches):
        where = f"branches[{b}]"
        if not isinstance(br, dict):
            raise CurveSpecError(f"{where}: expected an object")
        for key in ("m", "psi"):
            if key not in br:
                raise CurveSpecError(f"{where}: missing field {key!r}")
        psi = br["psi"]
        if not isinstance(psi, list) or len(psi) != n:
            raise CurveSpecError(f"{where}.psi: expected {n} coefficient lists (one per coordinate)")
        coeffs = []
        for j, col in enumerate(psi):
            if not isinstance(col, list) or not col:
                raise CurveSpecError(f"{where}.psi[{j}]: expected a nonempty coefficient list")
            coeffs.append([_cplx(x, f"{where}.psi[{j}][{k}]") for k, x in enumerate(col)])
        frame = br.get("frame")
        if frame is not None:
            frame = [[_cplx(x, f"{where}.frame[{i}][{j}]") for j, x in enumerate(row)]
                     for i, row in enumerate(frame)]
        try:
            out.append(NormalizedBranch(
                m=br["m"], psi=tuple(coeffs),
                domain_radius=float(br.get("domain_radius", 1.0)),
                frame=None if frame is None else np.array(frame),
                name=str(br.get("name", ""))))
        except CurveSpecError as exc:
            raise CurveSpecError(f"{where}: {exc}") from None
    wr = data.get("working_radius")
    return MultiBranchCurve(tuple(out), ambient, None if wr is None else float(wr))


def load_curve_spec(path: str | Path) -> MultiBranchCurve:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CurveSpecError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return parse_curve_spec(data)
    except CurveSpecError as exc:
        raise CurveSpecError(f"{path}: {exc}") from None


def _pair(c):
    c = complex(c)
    return [c.real, c.imag] if c.imag else c.real


def curve_to_spec(curve: MultiBranchCurve) -> dict:
    n = curve.ambient.n
    herm = "identity" if np.array_equal(curve.ambient.H, np.eye(n)) else \
        [[_pair(x) for x in row] for row in curve.ambient.H]
    branches = []
    for b in curve.branches:
        entry = {"m": b.m, "psi": [[_pair(x) for x in a] for a in b.psi],
                 "domain_radius": b.domain_radius}
        if b.frame is not None:
            entry["frame"] = [[_pair(x) for x in row] for row in b.frame]
        if b.name:
            entry["name"] = b.name
        branches.append(entry)
    out = {"ambient_dim": n, "hermitian": herm, "branches": branches}
    if curve.working_radius is not None:
        out["working_radius"] = curve.working_radius
    return out


def single_branch(m: int, psi: Sequence, domain_radius: float = 1.0,
                  H=None, working_radius: float | None = None) -> MultiBranchCurve:
    """Convenience constructor for a one-branch curve."""
    n = len(psi)
    ambient = AmbientMetric.identity(n) if H is None else AmbientMetric(H)
    return MultiBranchCurve((NormalizedBranch(m, tuple(psi), domain_radius),), ambient, working_radius)
