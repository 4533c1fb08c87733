"""Uniform-grid spatial operators for the clamped fourth-order beam.

Discrete conventions used throughout the package:

* nodes ``x_i = i*dx`` with ``dx = L/(M-1)``; fields are length-M node vectors,
* clamped ends: zero Dirichlet values plus even ghost reflection
  ``u[-1] = u[1]`` and ``u[M] = u[M-2]`` (zero one-sided slope),
* quadrature is composite trapezoid, second order like the stencils,
* volume averages integrate the piecewise-linear nodal interpolant exactly
  over each volume, so a cell cut by a volume boundary has its weight split
  proportionally between the two volumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "VolumePartition",
    "first_dirichlet_eigenvalue",
    "trapezoid_weights",
    "inner_product",
    "biharmonic_apply",
    "second_difference",
    "tension_apply",
    "first_derivative",
    "fv_averages",
    "fv_inject",
    "volume_average_matrix",
    "volume_inject_matrix",
]

# Relative tolerance for deciding that a node sits exactly on a volume boundary.
_BOUNDARY_SNAP = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on [0, L] with at least the 5-point stencil support."""

    n_points: int
    length: float

    def __post_init__(self):
        if self.n_points < 7:
            raise ValueError("grid needs at least 7 nodes for the biharmonic stencil")
        if self.length <= 0:
            raise ValueError("grid length must be positive")

    @property
    def dx(self) -> float:
        return self.length / (self.n_points - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_points)

    def midpoints(self) -> np.ndarray:
        x = self.nodes()
        return 0.5 * (x[:-1] + x[1:])


@dataclass(frozen=True)
class VolumePartition:
    """N equal volumes J_k = [(k-1)h, kh) tiling [0, L], the last one closed."""

    n_volumes: int
    length: float

    def __post_init__(self):
        if self.n_volumes < 1:
            raise ValueError("need at least one volume")
        if self.length <= 0:
            raise ValueError("partition length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.n_volumes

    def boundaries(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_volumes + 1)


def first_dirichlet_eigenvalue(length: float) -> float:
    """First eigenvalue (pi/L)^2 of -d2/dx2 with zero boundary values."""
    if length <= 0:
        raise ValueError("length must be positive")
    return (np.pi / length) ** 2


def trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n_points, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx
    return w


def _check_length(f: np.ndarray, n: int, what: str = "field"):
    if len(f) != n:
        raise ValueError(f"{what} length {len(f)} does not match expected {n}")


def inner_product(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """Trapezoid approximation of the L2 inner product over [0, L]."""
    _check_length(f, grid.n_points)
    _check_length(g, grid.n_points, "second field")
    return float(np.dot(np.asarray(f) * trapezoid_weights(grid), np.asarray(g)))


def _ghost_extend(u: np.ndarray) -> np.ndarray:
    # even reflection about both ends: discrete zero slope at the clamps
    return np.concatenate(([u[1]], u, [u[-2]]))


def biharmonic_apply(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Fourth derivative by the 5-point stencil with clamped ghost reflection.

    Boundary rows are Dirichlet-eliminated and return 0.  The stencil is
    exact for quartics away from the two ghost-affected rows next to each
    clamp; there the even reflection replaces the analytic continuation.
    """
    _check_length(u, grid.n_points)
    M, dx = grid.n_points, grid.dx
    g = _ghost_extend(np.asarray(u, dtype=float))
    out = np.zeros(M)
    out[1:-1] = (
        g[0 : M - 2] - 4.0 * g[1 : M - 1] + 6.0 * g[2:M] - 4.0 * g[3 : M + 1] + g[4 : M + 2]
    ) / dx**4
    return out


def second_difference(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Second difference with clamped ghosts, evaluated on every node.

    Unlike the Dirichlet-eliminated operators this keeps the boundary rows
    (2*u[1]/dx^2 and 2*u[-2]/dx^2); those carry real bending energy of a
    clamped field and feed the ||u_xx|| functionals.
    """
    _check_length(u, grid.n_points)
    g = _ghost_extend(np.asarray(u, dtype=float))
    return (g[:-2] - 2.0 * g[1:-1] + g[2:]) / grid.dx**2


def tension_apply(a_half: np.ndarray, u: np.ndarray, grid: Grid) -> np.ndarray:
    """Flux form of [a(x) u_x]_x with half-node coefficients; 0 on boundary rows."""
    _check_length(u, grid.n_points)
    _check_length(a_half, grid.n_points - 1, "half-node coefficient")
    dx = grid.dx
    flux = np.asarray(a_half) * np.diff(np.asarray(u, dtype=float)) / dx
    out = np.zeros(grid.n_points)
    out[1:-1] = np.diff(flux) / dx
    return out


def first_derivative(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Central first difference; 0 on boundary rows (Dirichlet-eliminated)."""
    _check_length(v, grid.n_points)
    v = np.asarray(v, dtype=float)
    out = np.zeros(grid.n_points)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * grid.dx)
    return out


@lru_cache(maxsize=128)
def volume_average_matrix(part: VolumePartition, grid: Grid) -> np.ndarray:
    """(N, M) weight matrix mapping nodal values to volume means.

    Row k integrates the piecewise-linear interpolant exactly over J_k and
    divides by h, so constants and linear fields average exactly for any
    grid/volume alignment.  Requires every volume to contain at least one
    grid cell boundary-to-boundary (N <= M-1).
    """
    M, dx, L = grid.n_points, grid.dx, grid.length
    N, h = part.n_volumes, part.h
    if N > M - 1:
        raise ValueError("volumes finer than grid")
    W = np.zeros((N, M))
    for k in range(N):
        lo, hi = k * h, L if k == N - 1 else (k + 1) * h
        i0 = min(max(int(np.floor(lo / dx)), 0), M - 2)
        for i in range(i0, M - 1):
            xa = i * dx
            c, d = max(xa, lo), min(xa + dx, hi)
            if d <= c:
                if xa >= hi:
                    break
                continue
            # exact integral of the linear interpolant over [c, d]
            frac = (0.5 * (c + d) - xa) / dx
            W[k, i] += (d - c) * (1.0 - frac)
            W[k, i + 1] += (d - c) * frac
        W[k] /= h
    W.setflags(write=False)
    return W


def fv_averages(u: np.ndarray, part: VolumePartition, grid: Grid) -> np.ndarray:
    """Volume means (1/h) * integral of u over each J_k."""
    _check_length(u, grid.n_points)
    return volume_average_matrix(part, grid) @ np.asarray(u, dtype=float)


@lru_cache(maxsize=128)
def _inject_assignment(part: VolumePartition, grid: Grid):
    """Per-node volume index, plus the nodes sitting exactly on interior boundaries."""
    x = grid.nodes()
    N, h = part.n_volumes, part.h
    pos = x / h
    nearest = np.rint(pos)
    on_interior = (np.abs(pos - nearest) * h <= _BOUNDARY_SNAP * grid.length) & (
        nearest > 0
    ) & (nearest < N)
    idx = np.clip(np.floor(pos + _BOUNDARY_SNAP).astype(int), 0, N - 1)
    return idx, on_interior, nearest.astype(int)


def fv_inject(ubar: np.ndarray, part: VolumePartition, grid: Grid) -> np.ndarray:
    """Piecewise-constant field from volume values, sampled on the nodes.

    A node exactly on an interior volume boundary gets the mean of the two
    adjacent volume values.
    """
    ubar = np.asarray(ubar, dtype=float)
    _check_length(ubar, part.n_volumes, "volume vector")
    idx, on_interior, nearest = _inject_assignment(part, grid)
    out = ubar[idx]
    if on_interior.any():
        j = nearest[on_interior]
        out[on_interior] = 0.5 * (ubar[j - 1] + ubar[j])
    return out


def volume_inject_matrix(part: VolumePartition, grid: Grid) -> np.ndarray:
    """(M, N) matrix form of fv_inject."""
    cols = [fv_inject(e, part, grid) for e in np.eye(part.n_volumes)]
    return np.column_stack(cols)
