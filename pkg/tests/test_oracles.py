"""
Tests for the closed-form Couette passive scalar.

Validates:
- The dissipation exponent against direct quadrature
- Exact solution factors: identity at t = 0, semigroup in time
- Decay bound scan and the enhanced-dissipation rate scaling
- H^-1 damping functionals against their bound
"""

import numpy as np
import pytest
from scipy import integrate

from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid
from shearlab.core.oracles import (
    PassiveScalarSolution,
    damping_functionals,
    decay_bound_scan,
    dissipation_exponent,
    exact_solution,
    oracle_decay_rate,
    single_mode,
)


@pytest.fixture
def grid():
    return Grid(8, 32, np.pi)


class TestExponent:
    @pytest.mark.parametrize("k,eta", [(1.0, 0.0), (2.0, 5.0), (-3.0, 1.0), (0.0, 4.0)])
    def test_matches_quadrature(self, k, eta):
        nu, t = 1e-2, 3.0
        value, _ = integrate.quad(lambda tau: k ** 2 + (eta - k * tau) ** 2, 0.0, t)
        assert np.isclose(dissipation_exponent(nu, t, k, eta), nu * value)

    def test_identity_at_zero(self, grid):
        sol = PassiveScalarSolution(single_mode(grid, 1), 1e-3)
        assert np.array_equal(exact_solution(sol, 0.0).coeffs, sol.initial.coeffs)

    def test_semigroup(self, grid):
        """Restarting from F(s) with the clock shifted reproduces F(t)."""
        nu, s, t = 1e-2, 1.5, 4.0
        rng = np.random.default_rng(0)
        f = single_mode(grid, 2, eta_index=3).with_coeffs(rng.standard_normal(grid.shape) + 0j)
        sol = PassiveScalarSolution(f, nu)
        K, E = grid.mesh
        ratio = np.exp(-(dissipation_exponent(nu, t, K, E) - dissipation_exponent(nu, s, K, E)))
        assert np.allclose(sol.coefficients(t), ratio * sol.coefficients(s))

    def test_negative_viscosity_rejected(self, grid):
        with pytest.raises(InvalidInputError):
            PassiveScalarSolution(single_mode(grid, 1), -1.0)


class TestDecay:
    def test_decay_bound_holds(self, grid):
        sol = PassiveScalarSolution(single_mode(grid, 1), 1e-4)
        scan = decay_bound_scan(sol, np.linspace(0.0, 200.0, 401))
        assert scan["worst_ratio"] <= 1.0

    def test_rate_scales_like_cube_root(self, grid):
        rates = [oracle_decay_rate(nu, grid).rate for nu in (1e-4, 1e-6)]
        slope = np.log(rates[1] / rates[0]) / np.log(1e-2)
        assert abs(slope - 1.0 / 3.0) < 0.03

    def test_fit_window(self, grid):
        fit = oracle_decay_rate(1e-3, grid, k=1, window=(1.0, 5.0))
        assert fit.t_window == pytest.approx((10.0, 50.0))


class TestDamping:
    def test_single_mode_integral_below_bound(self, grid):
        times = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 4000)])
        report = damping_functionals(PassiveScalarSolution(single_mode(grid, 1), 1e-6), times)
        assert report.bound == pytest.approx(2.0 * np.pi)
        assert 0.0 < report.integral <= report.bound
        assert report.pointwise_slope(10.0, 100.0) == pytest.approx(-1.0, abs=0.15)

    def test_zero_data(self, grid):
        from shearlab.core.grid import SpectralField

        report = damping_functionals(PassiveScalarSolution(SpectralField.zeros(grid), 1e-4), [0.0, 1.0, 2.0])
        assert report.integral == 0.0
        with pytest.raises(InvalidInputError, match="fewer than two"):
            report.pointwise_slope(0.0, 2.0)

    def test_times_must_increase(self, grid):
        with pytest.raises(InvalidInputError):
            damping_functionals(PassiveScalarSolution(single_mode(grid, 1), 1e-4), [0.0, 2.0, 1.0])
