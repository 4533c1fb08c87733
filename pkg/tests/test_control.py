"""Feedback term, observable functional, and threshold arithmetic."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from riser_stab.configs import ControlConfig, RiserParams
from riser_stab.control import (
    b_n,
    check_conditions,
    check_conditions_linear,
    check_conditions_nonlinear,
    feedback_term,
)
from riser_stab.lemmas import TestFunctionFamily, sample_functions
from riser_stab.operators import Grid, VolumePartition, first_derivative, inner_product


def params_with(a0=1.0, **kw):
    tension = {"type": "constant", "value": -a0}
    defaults = dict(m=1.0, k=1.0, b=1.0, gamma=0.0, p=1.0, L=np.pi, a0=a0, a1=1.0, tension=tension)
    defaults.update(kw)
    return RiserParams(**defaults)


class TestFeedbackTerm:
    def test_zero_gain(self):
        g = Grid(21, 1.0)
        cfg = ControlConfig(4, 0.0, 1.0)
        rng = np.random.default_rng(0)
        u = rng.normal(size=21)
        assert_allclose(feedback_term(u, cfg, cfg.partition(), g), 0.0)

    def test_constant_field(self):
        g = Grid(21, 1.0)
        cfg = ControlConfig(5, 1.0, 1.0)
        out = feedback_term(np.full(21, 2.0), cfg, cfg.partition(), g)
        assert_allclose(out, -2.0, rtol=1e-12)

    def test_linear_field_two_volumes(self):
        g = Grid(21, 1.0)
        cfg = ControlConfig(2, 2.0, 1.0)
        out = feedback_term(g.nodes(), cfg, cfg.partition(), g)
        # averages {0.25, 0.75} scaled by -mu; boundary node is averaged
        assert_allclose(out[:10], -0.5, rtol=1e-12)
        assert_allclose(out[11:], -1.5, rtol=1e-12)
        assert out[10] == pytest.approx(-1.0, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(-5, 5, allow_nan=False),
        st.floats(-5, 5, allow_nan=False),
        st.integers(0, 2**32 - 1),
    )
    def test_linearity(self, alpha, beta, seed):
        g = Grid(25, 1.0)
        cfg = ControlConfig(4, 3.0, 1.0)
        part = cfg.partition()
        rng = np.random.default_rng(seed)
        u, w = rng.normal(size=25), rng.normal(size=25)
        combo = feedback_term(alpha * u + beta * w, cfg, part, g)
        split = alpha * feedback_term(u, cfg, part, g) + beta * feedback_term(w, cfg, part, g)
        assert_allclose(combo, split, rtol=1e-10, atol=1e-10)


class TestObservableFunctional:
    def test_zero(self):
        g = Grid(21, 1.0)
        assert b_n(np.zeros(21), VolumePartition(4, 1.0), g) == 0.0

    def test_constant(self):
        g = Grid(21, 1.0)
        for N in (1, 4, 5):
            val = b_n(np.full(21, 3.0), VolumePartition(N, 1.0), g)
            assert val == pytest.approx(N * 9.0, rel=1e-12)

    def test_linear_two_volumes(self):
        g = Grid(21, 1.0)
        assert b_n(g.nodes(), VolumePartition(2, 1.0), g) == pytest.approx(0.625, rel=1e-12)

    def test_nonnegative_random(self):
        g = Grid(33, 1.0)
        rng = np.random.default_rng(7)
        for _ in range(20):
            assert b_n(rng.normal(size=33), VolumePartition(8, 1.0), g) >= 0.0

    def test_norm_bound_restatement(self):
        # h*B_N(u) + h^2*||u_x||^2 >= ||u||^2 for sampled clamped fields
        g = Grid(257, 1.0)
        fam = TestFunctionFamily("clamped-polynomial", seed=5)
        phi, _, _ = sample_functions(fam, 50, g)
        for N in (2, 4, 8):
            part = VolumePartition(N, 1.0)
            for row in phi:
                ux = first_derivative(row, g)
                lhs = inner_product(row, row, g)
                rhs = part.h * b_n(row, part, g) + part.h**2 * inner_product(ux, ux, g)
                assert rhs >= lhs * (1 - 1e-8)


class TestNonlinearThresholds:
    def test_reference_point(self):
        rep = check_conditions_nonlinear(params_with(a0=1.0, gamma=2.0), ControlConfig(8, 4.0, np.pi))
        assert rep.delta == pytest.approx(0.25, rel=1e-15)
        assert rep.D0 == pytest.approx(0.5, rel=1e-15)
        assert rep.h_max_nonlinear == pytest.approx(0.25, rel=1e-15)
        assert rep.mu_min_nonlinear == pytest.approx(2.0, rel=1e-15)

    def test_no_destabilizing_tension(self):
        params = params_with(a0=0.0, tension={"type": "constant", "value": 0.5})
        rep = check_conditions_nonlinear(params, ControlConfig(3, 0.0, np.pi))
        assert math.isinf(rep.h_max_nonlinear)
        assert rep.mu_min_nonlinear == 0.0
        assert rep.satisfied_nonlinear

    def test_gamma_zero_limit(self):
        rep = check_conditions_nonlinear(params_with(gamma=0.0), ControlConfig(8, 4.0, np.pi))
        assert rep.delta == pytest.approx(0.25, rel=1e-15)
        assert rep.D0 == pytest.approx(1.0, rel=1e-15)

    def test_variant_flags_present(self):
        rep = check_conditions_nonlinear(params_with(gamma=2.0), ControlConfig(8, 4.0, np.pi))
        for key in (
            "h_le_k_sqrt_lam1_over_2a0",
            "h2_le_k2_lam1_over_2a0",
            "h2_le_lam1_D0sq_over_2a0sq",
            "mu_ge_a0sq_over_2k",
            "mu_ge_a0sq_over_k",
            "mu_ge_a0sq_over_D0",
        ):
            assert key in rep.derivation_variant_flags

    def test_delta_override_flagged(self):
        rep = check_conditions(params_with(gamma=2.0), ControlConfig(8, 4.0, np.pi), delta=0.1)
        assert rep.delta_overridden and rep.delta == 0.1

    def test_override_can_break_applicability(self):
        # delta beyond the gyroscopic margin makes D0 <= 0
        rep = check_conditions(params_with(gamma=2.0), ControlConfig(8, 4.0, np.pi), delta=1.0)
        assert rep.D0 <= 0.0
        assert not rep.nonlinear_applicable
        assert rep.notes


class TestLinearThresholds:
    def test_reference_point(self):
        rep = check_conditions_linear(params_with(a0=1.0, b=1.0), ControlConfig(8, 8.0, np.pi))
        assert rep.eps == pytest.approx(0.5, rel=1e-15)
        assert rep.h_max_linear == pytest.approx(math.sqrt(3.0 / 8.0), rel=1e-15)
        assert rep.mu_min_linear == pytest.approx(8.0, rel=1e-15)

    def test_symmetric_eps(self):
        rep = check_conditions_linear(params_with(b=2.0, m=1.0), ControlConfig(8, 8.0, np.pi))
        assert rep.eps == pytest.approx(1.0, rel=1e-15)

    def test_a0_zero_uses_second_argument_only(self):
        params = params_with(a0=0.0, tension={"type": "constant", "value": 0.5})
        rep = check_conditions_linear(params, ControlConfig(8, 0.0, np.pi))
        assert rep.h_max_linear == pytest.approx(math.sqrt(3.0 / 8.0), rel=1e-15)
        assert rep.mu_min_linear == 0.0

    def test_b_nonpositive_inapplicable(self):
        rep = check_conditions_linear(params_with(b=0.0), ControlConfig(8, 8.0, np.pi))
        assert not rep.linear_applicable
        assert rep.eps is None


class TestThresholdProperties:
    def test_pure(self):
        params = params_with(gamma=1.5)
        cfg = ControlConfig(6, 3.0, np.pi)
        r1 = check_conditions(params, cfg)
        r2 = check_conditions(params, cfg)
        assert r1.to_dict() == r2.to_dict()

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
    def test_monotone_in_a0(self, lo, hi):
        a_lo, a_hi = sorted((lo, hi))
        cfg = ControlConfig(8, 4.0, np.pi)
        rl = check_conditions(params_with(a0=a_lo, gamma=1.0), cfg)
        rh = check_conditions(params_with(a0=a_hi, gamma=1.0), cfg)
        assert rh.h_max_nonlinear <= rl.h_max_nonlinear + 1e-12
        assert rh.mu_min_nonlinear >= rl.mu_min_nonlinear - 1e-12
        assert rh.h_max_linear <= rl.h_max_linear + 1e-12
        assert rh.mu_min_linear >= rl.mu_min_linear - 1e-12

    def test_report_serializes_infinity(self):
        params = params_with(a0=0.0, tension={"type": "constant", "value": 0.5})
        rep = check_conditions(params, ControlConfig(4, 0.0, np.pi))
        assert rep.to_dict()["h_max_nonlinear"] == "inf"
