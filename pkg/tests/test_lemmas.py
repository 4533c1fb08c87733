"""Inequality harness: specific oracle values plus randomized batches."""

import numpy as np
import pytest

from riser_stab.lemmas import (
    TestFunctionFamily,
    check_fv_approximation,
    check_fv_norm_bound,
    check_interpolation,
    check_poincare,
    run_lemma_suite,
    sample_functions,
)
from riser_stab.operators import Grid, VolumePartition, trapezoid_weights, volume_average_matrix


class TestFamilies:
    def test_kinds_validated(self):
        with pytest.raises(ValueError):
            TestFunctionFamily("wavelets")

    def test_all_samples_vanish_at_boundary(self):
        g = Grid(129, 1.0)
        for kind in ("sine-series", "clamped-polynomial", "bump"):
            phi, _, _ = sample_functions(TestFunctionFamily(kind, seed=1), 20, g)
            assert np.all(phi[:, 0] == 0.0)
            assert np.all(phi[:, -1] == 0.0)

    def test_clamped_kinds_have_flat_ends(self):
        g = Grid(513, 1.0)
        for kind in ("clamped-polynomial", "bump"):
            _, phi_x, _ = sample_functions(TestFunctionFamily(kind, seed=2), 10, g)
            assert np.max(np.abs(phi_x[:, 0])) == 0.0
            assert np.max(np.abs(phi_x[:, -1])) == 0.0

    def test_deterministic_for_seed(self):
        g = Grid(65, 1.0)
        fam = TestFunctionFamily("sine-series", seed=42)
        a = sample_functions(fam, 5, g)[0]
        b = sample_functions(fam, 5, g)[0]
        assert np.array_equal(a, b)


class TestKnownValues:
    def test_fv_approximation_sine_quarter_volumes(self):
        # phi = sin(pi x), N = 4: rhs = h ||phi_x|| = pi/(4 sqrt(2))
        g = Grid(513, 1.0)
        part = VolumePartition(4, 1.0)
        x = g.nodes()
        phi = np.sin(np.pi * x)
        phi[0] = phi[-1] = 0.0
        w = trapezoid_weights(g)
        avg = np.asarray(volume_average_matrix(part, g))
        phibar = avg @ phi
        lhs = np.sqrt(max(np.dot(phi**2, w) - part.h * np.sum(phibar**2), 0.0))
        rhs = np.pi / (4.0 * np.sqrt(2.0))
        assert lhs < rhs
        assert rhs == pytest.approx(0.5554, abs=1e-4)

    def test_fv_norm_bound_sine_two_volumes(self):
        # lhs = 0.5, rhs = 0.5*(2*(2/pi)^2) + 0.25*(pi^2/2) ~ 1.639
        g = Grid(513, 1.0)
        part = VolumePartition(2, 1.0)
        x = g.nodes()
        phi = np.sin(np.pi * x)
        phi[0] = phi[-1] = 0.0
        w = trapezoid_weights(g)
        avg = np.asarray(volume_average_matrix(part, g))
        phibar = avg @ phi
        lhs = np.dot(phi**2, w)
        rhs = part.h * np.sum(phibar**2) + part.h**2 * np.dot((np.pi * np.cos(np.pi * x)) ** 2, w)
        assert lhs == pytest.approx(0.5, abs=1e-5)
        assert rhs == pytest.approx(0.4053 + 1.2337, abs=1e-3)
        assert lhs <= rhs

    def test_poincare_sharp_at_first_eigenfunction(self):
        g = Grid(513, 1.0)
        x = g.nodes()
        phi = np.sin(np.pi * x)
        w = trapezoid_weights(g)
        lhs = np.dot(phi**2, w)
        rhs = np.dot((np.pi * np.cos(np.pi * x)) ** 2, w) / np.pi**2
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_poincare_second_harmonic_ratio(self):
        g = Grid(513, 1.0)
        x = g.nodes()
        phi = np.sin(2 * np.pi * x)
        w = trapezoid_weights(g)
        lhs = np.dot(phi**2, w)
        rhs = np.dot((2 * np.pi * np.cos(2 * np.pi * x)) ** 2, w) / np.pi**2
        assert lhs / rhs == pytest.approx(0.25, rel=1e-10)

    def test_interpolation_bump_ratio(self):
        # ||phi_x||^2 = 2/105 vs ||phi|| ||phi_xx|| ~ 0.03563 for x^2(1-x)^2
        g = Grid(513, 1.0)
        fam = TestFunctionFamily("bump", seed=0)
        summary = check_interpolation(fam, 1, g)
        assert summary.passed
        assert summary.worst_ratio < 1.0
        x = g.nodes()
        phi_x = 2 * x * (1 - x) ** 2 - 2 * x**2 * (1 - x)
        w = trapezoid_weights(g)
        assert np.dot(phi_x**2, w) == pytest.approx(2.0 / 105.0, abs=1e-8)


class TestRandomizedChecks:
    @pytest.mark.parametrize("kind", ["sine-series", "clamped-polynomial", "bump"])
    @pytest.mark.parametrize("N", [1, 2, 4, 8, 16])
    def test_fv_inequalities_no_violations(self, kind, N):
        fam = TestFunctionFamily(kind, seed=11)
        a = check_fv_approximation(fam, N, 100)
        b = check_fv_norm_bound(fam, N, 100)
        assert a.passed and b.passed
        assert a.worst_relative_margin >= -1e-8
        assert b.worst_relative_margin >= -1e-8

    @pytest.mark.parametrize("kind", ["sine-series", "clamped-polynomial", "bump"])
    def test_poincare_no_violations(self, kind):
        summary = check_poincare(TestFunctionFamily(kind, seed=13), 100)
        assert summary.passed

    @pytest.mark.parametrize("kind", ["clamped-polynomial", "bump"])
    def test_interpolation_no_violations(self, kind):
        summary = check_interpolation(TestFunctionFamily(kind, seed=17), 100)
        assert summary.passed

    def test_interpolation_rejects_unclamped_family(self):
        with pytest.raises(ValueError, match="clamped"):
            check_interpolation(TestFunctionFamily("sine-series"), 10)

    def test_suite_deterministic(self):
        a = run_lemma_suite(n_samples=50, seed=5)
        b = run_lemma_suite(n_samples=50, seed=5)
        assert [s.to_dict() for s in a] == [s.to_dict() for s in b]
