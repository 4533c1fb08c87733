"""Simulator and verification harness for finite-volume nudging stabilization
of a clamped, tensioned fourth-order beam."""

from .configs import (
    ControlConfig,
    DescriptorError,
    RiserParams,
    ScenarioConfig,
    State,
    ValidationReport,
    load_scenario,
    sample_field,
    validate_scenario,
)
from .control import (
    ConditionReport,
    b_n,
    check_conditions,
    check_conditions_linear,
    check_conditions_nonlinear,
    feedback_term,
)
from .diagnostics import (
    DecayFit,
    EnergyReport,
    bounded_product_check,
    dissipation,
    energy_balance_residual,
    energy_functionals,
    fit_exponential,
    fit_polynomial,
)
from .lemmas import TestFunctionFamily, run_lemma_suite
from .operators import (
    Grid,
    VolumePartition,
    biharmonic_apply,
    first_derivative,
    first_dirichlet_eigenvalue,
    fv_averages,
    fv_inject,
    inner_product,
    second_difference,
    tension_apply,
)
from .timestepping import SemiDiscreteSystem, StepFailure, Trajectory, build_system, residual, simulate, step

__version__ = "0.1.0"
