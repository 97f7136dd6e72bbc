"""
Tests for the named experiments.

Validates:
- Oracle enhanced-dissipation rates scale like nu^{1/3} k^{2/3}
- Inviscid-damping integrals stay below their bound and barely move with nu
- Velocity decay slopes from simulator diagnostics
"""

import numpy as np
import pytest

from shearlab.core.errors import InvalidInputError
from shearlab.core.simulator import DiagnosticsRecord
from shearlab.services.experiments import (
    DISSIPATION_HEADER,
    fit_window,
    measure_enhanced_dissipation,
    measure_inviscid_damping,
    velocity_decay,
)


class TestEnhancedDissipation:
    def test_oracle_slope_and_k_ratio(self):
        report = measure_enhanced_dissipation([1e-4, 1e-5, 1e-6], k_list=(1, 2))
        assert abs(report.slope - 1.0 / 3.0) < 0.03
        assert report.k_ratios[1] == 1.0
        assert report.k_ratios[2] == pytest.approx(2.0 ** (2.0 / 3.0), rel=0.02)
        assert len(report.rates(1)) == 3
        assert np.all(np.diff(report.rates(1)) < 0)

    def test_fit_window_scales_with_k(self):
        lo, hi = fit_window(1e-3, 1)
        lo2, hi2 = fit_window(1e-3, 8)
        assert (lo, hi) == pytest.approx((10.0, 50.0))
        assert (lo2, hi2) == pytest.approx((2.5, 12.5))

    def test_report_csv(self, tmp_path):
        report = measure_enhanced_dissipation([1e-3, 1e-4])
        lines = report.write(tmp_path / "rates.csv").read_text().splitlines()
        assert lines[0] == ",".join(DISSIPATION_HEADER)
        assert len(lines) == 3

    def test_needs_two_viscosities(self):
        with pytest.raises(InvalidInputError, match="two viscosities"):
            measure_enhanced_dissipation([1e-4])

    def test_unknown_source(self):
        with pytest.raises(InvalidInputError, match="unknown source"):
            measure_enhanced_dissipation([1e-4, 1e-5], source="lab")

    def test_simulation_source_needs_settings(self):
        with pytest.raises(InvalidInputError):
            measure_enhanced_dissipation([1e-4, 1e-5], source="simulation")


class TestInviscidDamping:
    def test_integrals_are_uniform_in_nu(self):
        summary = measure_inviscid_damping([1e-4, 1e-6])
        assert summary.within_bound
        assert summary.spread <= 0.1
        assert all(r.integral > 0 for r in summary.rows)

    def test_slope_missing_outside_grid(self):
        summary = measure_inviscid_damping([1e-4], t_grid=[0.0, 1.0, 2.0])
        assert np.isnan(summary.rows[0].slope)


class TestVelocityDecay:
    def test_power_law_slopes(self):
        times = np.geomspace(1.0, 100.0, 30)
        records = [DiagnosticsRecord(t=t, u1_pneq_l2=3.0 / t, u2_l2=0.5 / t ** 2) for t in times]
        records[-1].u_pneq_integral = 1.25
        decay = velocity_decay(records, 2.0, 50.0)
        assert decay.slope_u1 == pytest.approx(-1.0)
        assert decay.slope_u2 == pytest.approx(-2.0)
        assert decay.integral == 1.25

    def test_empty_window(self):
        records = [DiagnosticsRecord(t=t, u1_pneq_l2=1.0, u2_l2=1.0) for t in (0.0, 1.0)]
        decay = velocity_decay(records, 5.0, 10.0)
        assert np.isnan(decay.slope_u1) and np.isnan(decay.slope_u2)
