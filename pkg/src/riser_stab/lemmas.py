"""Randomized property checks for the preliminary inequalities.

Four inequalities are exercised over families of smooth test functions:
the finite-volume approximation bound, the finite-volume norm bound, the
Poincare inequality, and the interpolation inequality for clamped fields.
Derivatives come analytically from the descriptors, so a failed margin can
only be quadrature slack, not differencing error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .operators import (
    Grid,
    VolumePartition,
    first_dirichlet_eigenvalue,
    trapezoid_weights,
    volume_average_matrix,
)

__all__ = [
    "TestFunctionFamily",
    "CheckSummary",
    "sample_functions",
    "check_fv_approximation",
    "check_fv_norm_bound",
    "check_poincare",
    "check_interpolation",
    "run_lemma_suite",
]

KINDS = ("sine-series", "clamped-polynomial", "bump")
CLAMPED_KINDS = ("clamped-polynomial", "bump")
REL_TOL = 1e-8  # quadrature slack allowed on every inequality


@dataclass(frozen=True)
class TestFunctionFamily:
    """Sampling recipe for one family of boundary-vanishing test functions."""

    __test__ = False  # keep pytest collection away

    kind: str
    coeff_bound: float = 1.0
    harmonic_cutoff: int = 12
    degree: int = 6  # polynomial factor degree for clamped-polynomial
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind '{self.kind}'")
        if self.harmonic_cutoff < 1 or self.coeff_bound <= 0:
            raise ValueError("family needs positive coefficient bound and cutoff")

    @property
    def clamped(self) -> bool:
        return self.kind in CLAMPED_KINDS


def sample_functions(family: TestFunctionFamily, n_samples: int, grid: Grid):
    """Sample (phi, phi_x, phi_xx) as (n_samples, M) arrays, derivatives analytic."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(family.seed)
    x = grid.nodes()
    L = grid.length
    if family.kind == "sine-series":
        n = np.arange(1, family.harmonic_cutoff + 1)
        wav = n[:, None] * np.pi / L
        basis = np.sin(wav * x[None, :])
        basis_x = wav * np.cos(wav * x[None, :])
        basis_xx = -(wav**2) * np.sin(wav * x[None, :])
        coeff = rng.uniform(-family.coeff_bound, family.coeff_bound, (n_samples, len(n)))
        phi = coeff @ basis
        phi[:, 0] = 0.0
        phi[:, -1] = 0.0
        return phi, coeff @ basis_x, coeff @ basis_xx
    # both clamped kinds: w(x) * q(x) with w = x^2 (L-x)^2
    if family.kind == "bump":
        deg = 0
    else:
        deg = family.degree
    coeff = rng.uniform(-family.coeff_bound, family.coeff_bound, (n_samples, deg + 1))
    P = np.polynomial.polynomial
    w = P.polyfromroots([0.0, 0.0, L, L])  # x^2 (x-L)^2, sign irrelevant for the checks
    phi = np.empty((n_samples, grid.n_points))
    phi_x = np.empty_like(phi)
    phi_xx = np.empty_like(phi)
    for i in range(n_samples):
        c = P.polymul(w, coeff[i])
        phi[i] = P.polyval(x, c)
        phi_x[i] = P.polyval(x, P.polyder(c))
        phi_xx[i] = P.polyval(x, P.polyder(c, 2))
    phi[:, 0] = 0.0
    phi[:, -1] = 0.0
    return phi, phi_x, phi_xx


@dataclass
class CheckSummary:
    """Outcome of one inequality over one sampled family."""

    check: str
    kind: str
    n_samples: int
    n_violations: int
    worst_margin: float           # min over samples of rhs - lhs
    worst_relative_margin: float  # min over samples of (rhs - lhs)/rhs
    worst_ratio: float            # max over samples of lhs/rhs (sharpness probe)
    tolerance: float = REL_TOL

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "kind": self.kind,
            "n_samples": self.n_samples,
            "n_violations": self.n_violations,
            "worst_margin": self.worst_margin,
            "worst_relative_margin": self.worst_relative_margin,
            "worst_ratio": self.worst_ratio,
            "tolerance": self.tolerance,
        }


def _summarize(check, family, lhs, rhs):
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    margin = rhs - lhs
    scale = np.maximum(rhs, 1e-300)
    rel = margin / scale
    violations = int(np.sum(rel < -REL_TOL))
    ratio = np.max(np.where(rhs > 0, lhs / scale, 0.0))
    return CheckSummary(
        check=check,
        kind=family.kind,
        n_samples=len(lhs),
        n_violations=violations,
        worst_margin=float(np.min(margin)),
        worst_relative_margin=float(np.min(rel)),
        worst_ratio=float(ratio),
    )


def _default_grid(length: float = 1.0) -> Grid:
    return Grid(513, length)


def _norms(fields: np.ndarray, grid: Grid) -> np.ndarray:
    w = trapezoid_weights(grid)
    return (fields**2) @ w


def check_fv_approximation(
    family: TestFunctionFamily, n_volumes: int, n_samples: int, grid: Optional[Grid] = None
) -> CheckSummary:
    """||phi - sum_k phibar_k chi_k|| <= h ||phi_x|| over the sampled family.

    The left side uses the projection identity ||phi - P phi||^2 =
    ||phi||^2 - h sum_k phibar_k^2, which is exact under the volume-restricted
    quadrature because P is the quadrature-orthogonal projection onto
    piecewise constants.
    """
    grid = grid or _default_grid()
    part = VolumePartition(n_volumes, grid.length)
    phi, phi_x, _ = sample_functions(family, n_samples, grid)
    avg = np.asarray(volume_average_matrix(part, grid))
    phibar = phi @ avg.T
    lhs_sq = np.maximum(_norms(phi, grid) - part.h * np.sum(phibar**2, axis=1), 0.0)
    lhs = np.sqrt(lhs_sq)
    rhs = part.h * np.sqrt(_norms(phi_x, grid))
    return _summarize("fv_approximation", family, lhs, rhs)


def check_fv_norm_bound(
    family: TestFunctionFamily, n_volumes: int, n_samples: int, grid: Optional[Grid] = None
) -> CheckSummary:
    """||phi||^2 <= h sum_k phibar_k^2 + h^2 ||phi_x||^2 over the family."""
    grid = grid or _default_grid()
    part = VolumePartition(n_volumes, grid.length)
    phi, phi_x, _ = sample_functions(family, n_samples, grid)
    avg = np.asarray(volume_average_matrix(part, grid))
    phibar = phi @ avg.T
    lhs = _norms(phi, grid)
    rhs = part.h * np.sum(phibar**2, axis=1) + part.h**2 * _norms(phi_x, grid)
    return _summarize("fv_norm_bound", family, lhs, rhs)


def check_poincare(
    family: TestFunctionFamily, n_samples: int, grid: Optional[Grid] = None
) -> CheckSummary:
    """||phi||^2 <= lambda1^{-1} ||phi_x||^2 for boundary-vanishing samples."""
    grid = grid or _default_grid()
    lam1 = first_dirichlet_eigenvalue(grid.length)
    phi, phi_x, _ = sample_functions(family, n_samples, grid)
    return _summarize("poincare", family, _norms(phi, grid), _norms(phi_x, grid) / lam1)


def check_interpolation(
    family: TestFunctionFamily, n_samples: int, grid: Optional[Grid] = None
) -> CheckSummary:
    """||phi_x||^2 <= ||phi|| ||phi_xx|| for clamped families only."""
    if not family.clamped:
        raise ValueError("interpolation check requires a clamped family kind")
    grid = grid or _default_grid()
    phi, phi_x, phi_xx = sample_functions(family, n_samples, grid)
    lhs = _norms(phi_x, grid)
    rhs = np.sqrt(_norms(phi, grid)) * np.sqrt(_norms(phi_xx, grid))
    return _summarize("interpolation", family, lhs, rhs)


def run_lemma_suite(
    n_samples: int = 1000,
    seed: int = 0,
    n_volumes: tuple = (1, 2, 4, 8, 16),
    length: float = 1.0,
    grid_points: int = 513,
) -> list[CheckSummary]:
    """Run every check over every family; the harness behind ``verify-lemmas``."""
    grid = Grid(grid_points, length)
    families = [
        TestFunctionFamily("sine-series", seed=seed),
        TestFunctionFamily("clamped-polynomial", seed=seed + 1),
        TestFunctionFamily("bump", seed=seed + 2),
    ]
    out = []
    for fam in families:
        for N in n_volumes:
            out.append(check_fv_approximation(fam, N, n_samples, grid))
            out.append(check_fv_norm_bound(fam, N, n_samples, grid))
        out.append(check_poincare(fam, n_samples, grid))
        if fam.clamped:
            out.append(check_interpolation(fam, n_samples, grid))
    return out
