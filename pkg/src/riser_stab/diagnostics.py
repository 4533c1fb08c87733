"""Energy and Lyapunov functionals, balance residuals, and decay-rate fits.

All norms use the same trapezoid quadrature and the same clamped-ghost second
difference as the time stepper, so the reported functionals are mutually
consistent with the discrete dynamics to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .configs import ControlConfig, RiserParams, State
from .control import ConditionReport, b_n
from .operators import Grid, VolumePartition, inner_product, second_difference, trapezoid_weights

__all__ = [
    "EnergyReport",
    "DecayFit",
    "BalanceResidual",
    "BoundedProduct",
    "energy_functionals",
    "dissipation",
    "energy_balance_residual",
    "default_fit_window",
    "fit_exponential",
    "fit_polynomial",
    "bounded_product_check",
]

# CSV / report column order, stable across releases
ENERGY_FIELDS = (
    "t",
    "norm_v_sq",
    "norm_uxx_sq",
    "tension_energy",
    "bn",
    "script_E",
    "big_E",
    "script_E1",
    "W",
    "dissipation",
)


@dataclass(frozen=True)
class EnergyReport:
    """Sampled functionals at one time level (NaN where a constant is undefined)."""

    t: float
    norm_v_sq: float
    norm_uxx_sq: float
    tension_energy: float
    bn: float
    script_E: float
    big_E: float
    script_E1: float
    W: float
    dissipation: float

    def as_tuple(self):
        return tuple(getattr(self, name) for name in ENERGY_FIELDS)


def _tension_energy(u: np.ndarray, a_half: np.ndarray, grid: Grid) -> float:
    # half-node form, exactly paired with the flux tension operator
    slopes = np.diff(u) / grid.dx
    return float(np.sum(a_half * slopes**2) * grid.dx)


def dissipation(state: State, params: RiserParams, grid: Grid, nonlinear: bool) -> float:
    """b * integral of |u_t|^(p+2); p is taken as 0 outside nonlinear mode."""
    p = params.p if nonlinear else 0.0
    w = trapezoid_weights(grid)
    return float(params.b * np.dot(w, np.abs(state.v) ** (p + 2.0)))


def energy_functionals(
    state: State,
    params: RiserParams,
    control: ControlConfig,
    grid: Grid,
    part: VolumePartition,
    constants: ConditionReport,
    nonlinear: bool = False,
) -> EnergyReport:
    """Evaluate every tracked functional for one state.

    The cross-term weights delta and eps come from the condition report so
    energy reports and threshold checks always agree on the constants.
    """
    u, v = state.u, state.v
    norm_v_sq = inner_product(v, v, grid)
    uxx = second_difference(u, grid)
    norm_uxx_sq = inner_product(uxx, uxx, grid)
    a_half = params.tension_on_midpoints(grid)
    tension = _tension_energy(u, a_half, grid)
    bn_val = b_n(u, part, grid)
    mu_h = control.mu * part.h

    script_E = (
        0.5 * params.m * norm_v_sq
        + 0.5 * params.k * norm_uxx_sq
        + 0.5 * tension
        + 0.5 * mu_h * bn_val
    )
    cross_uv = inner_product(u, v, grid)
    delta = constants.delta
    big_E = script_E + delta * params.m * cross_uv if delta is not None else math.nan
    if constants.D0 is not None and delta is not None:
        script_E1 = (
            params.m * norm_v_sq
            + delta * constants.D0 * norm_uxx_sq
            + delta * tension
            + delta * mu_h * bn_val
        )
    else:
        script_E1 = math.nan
    eps = constants.eps
    if eps is not None:
        norm_u_sq = inner_product(u, u, grid)
        W = (
            script_E
            + eps * params.m * cross_uv
            + 0.5 * eps * params.b * norm_u_sq
        )
    else:
        W = math.nan
    return EnergyReport(
        t=state.t,
        norm_v_sq=norm_v_sq,
        norm_uxx_sq=norm_uxx_sq,
        tension_energy=tension,
        bn=bn_val,
        script_E=script_E,
        big_E=big_E,
        script_E1=script_E1,
        W=W,
        dissipation=dissipation(state, params, grid, nonlinear),
    )


@dataclass(frozen=True)
class BalanceResidual:
    value: float
    relative: bool  # False when the initial energy vanished


def energy_balance_residual(traj) -> BalanceResidual:
    """Worst deviation from script_E(t) - script_E(0) + cumulative dissipation = 0.

    The cumulative dissipation integral uses trapezoid over the samples.
    Relative to script_E(0) unless that is zero, in which case the absolute
    residual is returned and flagged.
    """
    t = np.asarray(traj.times)
    E = np.asarray(traj.samples["script_E"])
    D = np.asarray(traj.samples["dissipation"])
    if len(t) == 0:
        return BalanceResidual(0.0, True)
    cumulative = np.concatenate(
        ([0.0], np.cumsum(0.5 * (D[1:] + D[:-1]) * np.diff(t)))
    )
    resid = np.max(np.abs(E - E[0] + cumulative))
    if E[0] == 0.0:
        return BalanceResidual(float(resid), relative=False)
    return BalanceResidual(float(resid / abs(E[0])), relative=True)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares decay fit over a transient-free window."""

    kind: str  # "exponential" or "polynomial"
    rate: float
    window: tuple[float, float]
    r_squared: float
    claimed_rate: Optional[float] = None
    n_points: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rate": self.rate,
            "window": list(self.window),
            "r_squared": self.r_squared,
            "claimed_rate": self.claimed_rate,
            "n_points": self.n_points,
        }


def default_fit_window(t_final: float) -> tuple[float, float]:
    """Transient-excluding default [max(1, 0.1 t_final), t_final]."""
    return (max(1.0, 0.1 * t_final), t_final)


def _window_mask(times, window):
    t = np.asarray(times, dtype=float)
    lo, hi = window
    return t, (t >= lo) & (t <= hi)


def _least_squares_line(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def fit_exponential(times, values, window=None) -> DecayFit:
    """Fit value ~ C exp(-rate t) by least squares on log(value)."""
    t = np.asarray(times, dtype=float)
    if window is None:
        window = default_fit_window(float(t[-1]))
    t, mask = _window_mask(t, window)
    v = np.asarray(values, dtype=float)[mask]
    t = t[mask]
    if len(t) < 2:
        raise ValueError("fit window contains fewer than two samples")
    if np.any(v <= 0.0):
        raise ValueError("nonpositive values in fit window")
    slope, _, r2 = _least_squares_line(t, np.log(v))
    return DecayFit("exponential", -slope, tuple(window), r2, n_points=len(t))


def fit_polynomial(times, values, window=None, claimed_rate=None) -> DecayFit:
    """Fit value ~ C t^(-rate) by least squares on log(value) vs log(t)."""
    t = np.asarray(times, dtype=float)
    if window is None:
        window = default_fit_window(float(t[-1]))
    t, mask = _window_mask(t, window)
    v = np.asarray(values, dtype=float)[mask]
    t = t[mask]
    if len(t) < 2:
        raise ValueError("fit window contains fewer than two samples")
    if np.any(v <= 0.0) or np.any(t <= 0.0):
        raise ValueError("nonpositive values or times in fit window")
    slope, _, r2 = _least_squares_line(np.log(t), np.log(v))
    return DecayFit("polynomial", -slope, tuple(window), r2, claimed_rate, n_points=len(t))


@dataclass(frozen=True)
class BoundedProduct:
    sup: float
    is_bounded: bool
    head_sup: float
    tail_sup: float
    exponent: float
    window: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "sup": self.sup,
            "is_bounded": self.is_bounded,
            "head_sup": self.head_sup,
            "tail_sup": self.tail_sup,
            "exponent": self.exponent,
            "window": list(self.window),
        }


def bounded_product_check(times, values, exponent, window=None) -> BoundedProduct:
    """Check boundedness of t^exponent * value over the window.

    Bounded means the sup over the last quarter of the window does not exceed
    the sup over the first three quarters (a growing product concentrates its
    sup in the tail; a bounded one does not).
    """
    t = np.asarray(times, dtype=float)
    if window is None:
        window = default_fit_window(float(t[-1]))
    t, mask = _window_mask(t, window)
    v = np.asarray(values, dtype=float)[mask]
    t = t[mask]
    if len(t) == 0:
        raise ValueError("empty window")
    product = t**exponent * v
    split = window[0] + 0.75 * (window[1] - window[0])
    head = product[t <= split]
    tail = product[t > split]
    head_sup = float(np.max(head)) if len(head) else 0.0
    tail_sup = float(np.max(tail)) if len(tail) else 0.0
    bounded = tail_sup <= head_sup * (1.0 + 1e-12) + 1e-300
    return BoundedProduct(
        sup=float(np.max(product)),
        is_bounded=bool(bounded),
        head_sup=head_sup,
        tail_sup=tail_sup,
        exponent=float(exponent),
        window=tuple(window),
    )
