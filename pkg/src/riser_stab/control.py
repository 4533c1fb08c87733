"""Feedback assembly, the observable functional, and admissibility thresholds.

The two stabilization results come with explicit sufficient conditions on the
volume width h and the gain mu.  The stated combined bounds govern the
``satisfied_*`` flags; the slightly different derivation-level bounds are
evaluated separately and carried in ``derivation_variant_flags`` so the gap
between the two stays visible in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .configs import ControlConfig, RiserParams
from .operators import Grid, VolumePartition, first_dirichlet_eigenvalue, fv_averages, fv_inject

__all__ = [
    "ConditionReport",
    "feedback_term",
    "b_n",
    "check_conditions",
    "check_conditions_nonlinear",
    "check_conditions_linear",
]


def feedback_term(
    u: np.ndarray, cfg: ControlConfig, part: VolumePartition, grid: Grid
) -> np.ndarray:
    """Nudging force field -mu * sum_k ubar_k chi_k, sampled on the nodes."""
    if cfg.mu == 0.0:
        return np.zeros(grid.n_points)
    return -cfg.mu * fv_inject(fv_averages(u, part, grid), part, grid)


def b_n(u: np.ndarray, part: VolumePartition, grid: Grid) -> float:
    """Sum of squared volume averages of u (nonnegative observable functional)."""
    ubar = fv_averages(u, part, grid)
    return float(np.dot(ubar, ubar))


@dataclass
class ConditionReport:
    """Derived constants and pass/fail of every stabilization threshold.

    ``h_max_* = inf`` and ``mu_min_* = 0`` encode the vacuous case a0 = 0
    (no destabilizing tension).  ``None`` marks quantities whose defining
    parameters are missing (eps needs b > 0).
    """

    lambda1: float
    delta: Optional[float] = None
    D0: Optional[float] = None
    eps: Optional[float] = None
    D1: Optional[float] = None
    M0: Optional[float] = None
    h: Optional[float] = None
    mu: Optional[float] = None
    h_max_nonlinear: Optional[float] = None
    mu_min_nonlinear: Optional[float] = None
    h_max_linear: Optional[float] = None
    mu_min_linear: Optional[float] = None
    satisfied_nonlinear: Optional[bool] = None
    satisfied_linear: Optional[bool] = None
    nonlinear_applicable: bool = True
    linear_applicable: bool = True
    delta_overridden: bool = False
    derivation_variant_flags: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, float) and math.isinf(value):
                out[key] = "inf"
            else:
                out[key] = value
        return out


def _delta_choice(params: RiserParams, lam1: float) -> float:
    first = lam1 * math.sqrt(params.k) / (4.0 * math.sqrt(params.m))
    if params.gamma == 0.0:
        return first
    return min(first, params.k * lam1 / params.gamma**2)


def check_conditions(
    params: RiserParams, cfg: ControlConfig, delta: Optional[float] = None
) -> ConditionReport:
    """Evaluate both sets of stabilization thresholds for one configuration.

    ``delta`` overrides the canonical choice min(lam1 sqrt(k)/(4 sqrt(m)),
    k lam1 / gamma^2); overriding is flagged as off-theorem.
    """
    lam1 = first_dirichlet_eigenvalue(params.L)
    rep = ConditionReport(lambda1=lam1, h=cfg.h, mu=cfg.mu)

    if delta is None:
        rep.delta = _delta_choice(params, lam1)
    else:
        rep.delta = float(delta)
        rep.delta_overridden = True
    rep.D0 = params.k - rep.delta * params.gamma**2 / (2.0 * lam1)
    a0 = params.a0
    flags = rep.derivation_variant_flags

    # --- nonlinear damping result -------------------------------------------
    if rep.D0 <= 0.0:
        rep.nonlinear_applicable = False
        rep.satisfied_nonlinear = False
        rep.notes.append("D0 <= 0: chosen delta breaks the gyroscopic margin; "
                         "nonlinear thresholds inapplicable")
    else:
        rep.M0 = params.m * (rep.delta + 1.0) + 0.5
        rep.D1 = min(
            2.0, rep.delta * rep.D0 / (2.0 * (params.k + params.a1 / lam1))
        )
        if a0 == 0.0:
            rep.h_max_nonlinear = math.inf
            rep.mu_min_nonlinear = 0.0
        else:
            rep.h_max_nonlinear = math.sqrt(lam1) * min(
                params.k / (2.0 * a0),
                params.k / math.sqrt(2.0 * a0),
                rep.D0 / (2.0 * a0),
            )
            rep.mu_min_nonlinear = a0**2 * max(1.0 / params.k, 1.0 / rep.D0)
        rep.satisfied_nonlinear = (
            cfg.h <= rep.h_max_nonlinear and cfg.mu >= rep.mu_min_nonlinear
        )
        # individual derivation-level conditions (vacuously true at a0 = 0)
        if a0 == 0.0:
            for name in (
                "h_le_k_sqrt_lam1_over_2a0",
                "h2_le_k2_lam1_over_2a0",
                "h2_le_lam1_D0sq_over_2a0sq",
                "mu_ge_a0sq_over_2k",
                "mu_ge_a0sq_over_k",
                "mu_ge_a0sq_over_D0",
            ):
                flags[name] = True
        else:
            flags["h_le_k_sqrt_lam1_over_2a0"] = cfg.h <= params.k * math.sqrt(lam1) / (2 * a0)
            flags["h2_le_k2_lam1_over_2a0"] = cfg.h**2 <= params.k**2 * lam1 / (2 * a0)
            flags["h2_le_lam1_D0sq_over_2a0sq"] = cfg.h**2 <= lam1 * rep.D0**2 / (2 * a0**2)
            flags["mu_ge_a0sq_over_2k"] = cfg.mu >= a0**2 / (2 * params.k)
            flags["mu_ge_a0sq_over_k"] = cfg.mu >= a0**2 / params.k
            flags["mu_ge_a0sq_over_D0"] = cfg.mu >= a0**2 / rep.D0

    # --- linear damping result ----------------------------------------------
    if params.b <= 0.0:
        rep.linear_applicable = False
        rep.satisfied_linear = False
        rep.notes.append("b <= 0: eps undefined; linear thresholds inapplicable")
    else:
        rep.eps = min(params.m * params.b / 2.0, params.b / (2.0 * params.m))
        second = params.k * math.sqrt(3.0 * lam1 / 8.0)
        if a0 == 0.0:
            rep.h_max_linear = second
            rep.mu_min_linear = 0.0
            flags["h_le_eps_k_sqrt_3lam1_over_8a0"] = True
            flags["mu_ge_2a0sq_over_k_epssq"] = True
        else:
            rep.h_max_linear = min(
                params.k / a0 * math.sqrt(lam1 / 2.0), second
            )
            rep.mu_min_linear = a0**2 / params.k * max(0.5, 2.0 / rep.eps**2)
            flags["h_le_eps_k_sqrt_3lam1_over_8a0"] = (
                cfg.h <= rep.eps * params.k * math.sqrt(3.0 * lam1 / (8.0 * a0))
            )
            flags["mu_ge_2a0sq_over_k_epssq"] = cfg.mu >= 2.0 * a0**2 / (
                params.k * rep.eps**2
            )
        rep.satisfied_linear = cfg.h <= rep.h_max_linear and cfg.mu >= rep.mu_min_linear

    return rep


def check_conditions_nonlinear(
    params: RiserParams, cfg: ControlConfig, delta: Optional[float] = None
) -> ConditionReport:
    """Threshold report governed by the nonlinear-damping result."""
    return check_conditions(params, cfg, delta=delta)


def check_conditions_linear(
    params: RiserParams, cfg: ControlConfig
) -> ConditionReport:
    """Threshold report governed by the linear-damping result (needs b > 0)."""
    return check_conditions(params, cfg)
