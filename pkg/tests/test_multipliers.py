"""
Tests for the Fourier weights and the norm multiplier.

Validates:
- Spec validation, regime switch time and regime pinning
- Weight ranges and derivative consistency (finite differences)
- M and A at the critical time, zeta growth
- Weighted norms of a single mode
- Audit: the range and zeta inequalities hold on random points
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.core.errors import InvalidInputError, RegimeMismatchError
from shearlab.core.grid import Grid
from shearlab.core.multipliers import (
    MultiplierSpec,
    Regime,
    Weight,
    ck_weight,
    deta_M,
    dt_M,
    echo_tail,
    eval_M,
    eval_M_and_A,
    eval_W,
    eval_zeta,
    ghost_commutator_check,
    multiplier_audit,
    weight_parts,
    weighted_norm,
    zeta_checks,
)
from shearlab.core.oracles import single_mode


@pytest.fixture
def spec():
    return MultiplierSpec(1e-3)


class TestSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [{"nu": 0.0}, {"nu": 1e-3, "K": 0.5}, {"nu": 1e-3, "delta": 1.0}, {"nu": 1e-3, "s": 1.0}, {"nu": 1e-3, "l_sum": 0}],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(InvalidInputError):
            MultiplierSpec(**kwargs)

    def test_switch_time(self, spec):
        assert np.isclose(spec.t_switch, 1e-3 ** (-1.0 / 6.0))
        assert spec.regime_at(1.0) is Regime.SHORT
        assert spec.regime_at(10.0) is Regime.LONG

    def test_dict_round_trip_keeps_regime(self):
        spec = MultiplierSpec(1e-3, K=16.0, regime="long")
        back = MultiplierSpec.from_dict(spec.to_dict(), 1e-3)
        assert back == spec

    def test_pinned_regime_rejects_other_times(self):
        short = MultiplierSpec(1e-3, regime=Regime.SHORT)
        with pytest.raises(RegimeMismatchError):
            eval_M(short, 100.0, 1.0, 0.0)
        long = MultiplierSpec(1e-3, regime=Regime.LONG)
        with pytest.raises(RegimeMismatchError):
            eval_M(long, 0.0, 1.0, 0.0)

    def test_circ_weight_short_regime_only(self, spec):
        with pytest.raises(RegimeMismatchError):
            eval_W(spec, Weight.I_CIRC, 100.0, 0.0, 0.0)


class TestWeights:
    @given(
        st.floats(min_value=0.0, max_value=200.0),
        st.integers(min_value=-40, max_value=40),
        st.floats(min_value=-500.0, max_value=500.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_ranges(self, t, k, eta):
        spec = MultiplierSpec(1e-3, l_sum=32)
        for which in (Weight.NU, Weight.I, Weight.E):
            W = eval_W(spec, which, t, float(k), eta)
            assert np.pi / 2.0 <= W <= 1.5 * np.pi

    @pytest.mark.parametrize("which", ["nu", "I", "E"])
    def test_derivatives_match_finite_differences(self, which):
        spec = MultiplierSpec(1e-3, K=4.0, l_sum=16)
        t, k, eta, h = 7.0, 3.0, 18.0, 1e-5
        W, Wt, We = weight_parts(spec, which, t, k, eta)
        fd_t = (eval_W(spec, which, t + h, k, eta) - eval_W(spec, which, t - h, k, eta)) / (2 * h)
        fd_e = (eval_W(spec, which, t, k, eta + h) - eval_W(spec, which, t, k, eta - h)) / (2 * h)
        assert np.isclose(Wt, fd_t, rtol=1e-5, atol=1e-10)
        assert np.isclose(We, fd_e, rtol=1e-5, atol=1e-10)

    def test_multiplier_derivatives_match_finite_differences(self):
        spec = MultiplierSpec(1e-3, K=4.0, l_sum=16)
        t, k, eta, h = 20.0, 2.0, 30.0, 1e-5
        fd_t = (eval_M(spec, t + h, k, eta) - eval_M(spec, t - h, k, eta)) / (2 * h)
        fd_e = (eval_M(spec, t, k, eta + h) - eval_M(spec, t, k, eta - h)) / (2 * h)
        assert np.isclose(dt_M(spec, t, k, eta), fd_t, rtol=1e-5, atol=1e-10)
        assert np.isclose(deta_M(spec, t, k, eta), fd_e, rtol=1e-5, atol=1e-10)

    def test_weights_decrease_in_time(self, spec):
        t = np.linspace(0.0, 50.0, 101)
        for which in ("nu", "I"):
            assert np.all(np.diff(eval_W(spec, which, t, 2.0, 30.0)) <= 0)
        assert np.all(ck_weight(spec, "I", t, 2.0, 30.0) >= 0)

    def test_ck_weight_rejects_circ(self, spec):
        with pytest.raises(InvalidInputError):
            ck_weight(spec, "I_circ", 0.0, 1.0, 0.0)

    def test_echo_tail_closed_form(self):
        spec = MultiplierSpec(1e-3, l_sum=64)
        ell = np.arange(65, 200000, dtype=float)
        assert np.isclose(echo_tail(spec), 2.0 * np.sum(ell ** -2.0), rtol=1e-3)


class TestMultiplier:
    def test_critical_time_value(self, spec):
        """At t = eta / k the inviscid weight equals pi."""
        M, A_tilde, A = eval_M_and_A(spec, 2.0, 1.0, 2.0)
        assert np.isclose(M, np.pi)
        assert np.isclose(A_tilde, np.pi * 6.0)
        assert np.isclose(A, eval_zeta(spec, 2.0, 1.0) * A_tilde)

    def test_zeta(self, spec):
        assert eval_zeta(spec, 50.0, 0.0) == 1.0
        rate = spec.delta * spec.nu ** (1.0 / 3.0) * (8.0 ** (2.0 / 3.0) + 1.0)
        assert np.isclose(eval_zeta(spec, 3.0, 8.0), np.exp(3.0 * rate))

    def test_weighted_norm_single_mode(self, spec):
        """Both (+-1, 0) coefficients carry A = pi <1, 0>^2 at t = 0."""
        f = single_mode(Grid(8, 16, np.pi), 1, amplitude=0.5)
        expected = 2.0 * 0.25 * (np.pi * 2.0) ** 2
        assert np.isclose(weighted_norm(f, spec, 0.0), expected)

    def test_ghost_commutator_vanishes_for_constants(self, spec):
        grid = Grid(8, 32, np.pi)
        f = single_mode(grid, 1, eta_index=3)
        assert ghost_commutator_check(spec, "I", np.full(grid.n_v, 2.0), f, 1.0) < 1e-12
        bumpy = 1.0 + 0.1 * np.cos(grid.v)
        assert ghost_commutator_check(spec, "I", bumpy, f, 1.0) > 0


class TestAudit:
    def test_ranges_and_zeta_inequalities_hold(self):
        spec = MultiplierSpec(1e-3, l_sum=32)
        results = {r.name: r for r in multiplier_audit(spec, n_points=2000, seed=1)}
        for name in ("M_range_long", "W_nu_range", "W_I_range", "W_E_range", "M_range_short", "zeta_product"):
            assert results[name].passed, name
        assert results["M_range_long"].n_points == 2000

    def test_zeta_checks_on_the_full_grid(self, spec):
        """|k|, |l| <= 64 on a 100-point time grid, with no violations."""
        product, commutator = zeta_checks(spec)
        assert product.n_points == 100 * 128 ** 2
        assert product.passed
        assert commutator.n_points > 0
        assert commutator.passed

    def test_zeta_checks_emit_no_floating_point_warnings(self, spec):
        with np.errstate(all="raise"):
            product, commutator = zeta_checks(spec, k_max=8, times=np.linspace(0.0, 10.0, 5))
        assert product.n_points == 5 * 16 ** 2
        assert np.isfinite(commutator.worst_margin)

    def test_audit_row_layout(self):
        results = multiplier_audit(MultiplierSpec(1e-2, l_sum=8), n_points=200)
        row = results[0].to_row()
        assert len(row) == len(results[0].HEADER)
        assert row[0] == "M_range_long"
