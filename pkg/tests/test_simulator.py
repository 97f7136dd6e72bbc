"""
Tests for the moving-frame simulator.

Validates:
- Linear Couette runs reproduce the closed-form passive scalar
- The spatial mean of Omega is conserved by the nonlinear Couette flow
- Split and monolithic runs agree on a bump profile
- The energy budget closes at second order in dt
- Initial data scaling, the tilt guard, blow-up detection and verdicts
- Checkpoints restore the state exactly
"""

import numpy as np
import pytest

from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid
from shearlab.core.oracles import PassiveScalarSolution, exact_solution, single_mode
from shearlab.core.profile import ShearProfile
from shearlab.core.simulator import (
    CFL_SAFETY,
    DIAGNOSTICS_HEADER,
    DiagnosticsRecord,
    SimulationConfig,
    SplitMode,
    Verdict,
    energy_closure,
    evaluate_verdict,
    init_data,
    read_checkpoint,
    run,
    write_checkpoint,
)


def _config(profile, **kwargs):
    base = dict(dt=0.02, t_end=1.0, epsilon_amp=1e-3, n_samples=10, budget=False)
    base.update(kwargs)
    return SimulationConfig(profile=profile, **base)


class TestConfig:
    def test_rejects_bad_values(self, couette):
        with pytest.raises(InvalidInputError):
            _config(couette, dt=0.0)
        with pytest.raises(InvalidInputError):
            _config(couette, scheme="rk4")
        with pytest.raises(InvalidInputError):
            _config(couette, epsilon_amp=-1.0)

    def test_default_multiplier_follows_profile(self, couette):
        cfg = _config(couette, s=3.0)
        assert cfg.multiplier.nu == couette.nu
        assert cfg.multiplier.s == 3.0
        assert cfg.split_mode is SplitMode.MONOLITHIC


class TestInitialData:
    def test_scaled_to_amplitude(self, couette):
        cfg = _config(couette, epsilon_amp=0.2, seed=4)
        omega, u1 = init_data(cfg)
        U = couette.grid.coeffs_to_v(u1).real
        size = omega.sobolev_norm(cfg.s) + np.sqrt(2.0 * couette.grid.L_v * np.mean(U ** 2))
        assert size == pytest.approx(0.2 * couette.nu ** (1.0 / 3.0), rel=1e-10)

    def test_zero_mode_consistent_with_velocity(self, bump):
        cfg = _config(bump, seed=1)
        omega, u1 = init_data(cfg)
        grid = bump.grid
        dvU = grid.coeffs_to_v(1j * grid.eta * u1).real
        zero_row = grid.coeffs_to_v(omega.coeffs[0]).real
        mask = grid.dealias_mask[0]
        assert np.allclose(grid.v_to_coeffs(-bump.initial.B * dvU)[mask], omega.coeffs[0][mask], atol=1e-14)
        assert np.all(omega.coeffs[~grid.dealias_mask] == 0)
        assert np.max(np.abs(zero_row)) > 0

    def test_zero_amplitude(self, couette):
        omega, u1 = init_data(_config(couette, epsilon_amp=0.0))
        assert np.all(omega.coeffs == 0) and np.all(u1 == 0)


class TestCouetteOracle:
    def test_linear_run_matches_closed_form(self):
        grid = Grid(16, 64, np.pi)
        profile = ShearProfile.couette(grid, 1e-3)
        initial = single_mode(grid, 1)
        cfg = _config(
            profile, dt=0.01, t_end=2.0, n_samples=20, nonlinear=False, initial_field=initial, keep_snapshots=True
        )
        result = run(cfg)
        oracle = PassiveScalarSolution(initial, 1e-3)
        assert len(result.snapshots) == 21
        for t, field in result.snapshots:
            expected = exact_solution(oracle, t).coeffs
            assert np.max(np.abs(field.coeffs - expected)) <= 1e-8

    @pytest.mark.slow
    def test_linear_run_matches_closed_form_at_full_resolution(self):
        grid = Grid(128, 256, np.pi)
        profile = ShearProfile.couette(grid, 1e-3)
        initial = single_mode(grid, 1)
        cfg = _config(
            profile, dt=0.01, t_end=2.0, n_samples=20, nonlinear=False, initial_field=initial, keep_snapshots=True
        )
        result = run(cfg)
        oracle = PassiveScalarSolution(initial, 1e-3)
        assert len(result.snapshots) == 21
        for t, field in result.snapshots[1:]:
            expected = exact_solution(oracle, t).coeffs
            assert np.linalg.norm(field.coeffs - expected) <= 1e-8 * np.linalg.norm(expected)

    def test_mean_is_conserved(self, couette):
        cfg = _config(couette, epsilon_amp=0.5, keep_snapshots=True)
        result = run(cfg)
        means = [f.coeffs[0, 0] for _, f in result.snapshots]
        assert np.max(np.abs(np.array(means) - means[0])) <= 1e-12

    def test_small_data_is_stable(self, couette):
        result = run(_config(couette))
        assert result.verdict is Verdict.STABLE
        assert result.details["q_max"] >= 1.0


class TestSplitMode:
    def test_split_matches_monolithic(self):
        grid = Grid(8, 32, 8.0)
        profile = ShearProfile.tanh_bump(grid, 1e-2, 0.5, 1.0)
        kwargs = dict(dt=0.05, t_end=0.5, epsilon_amp=0.1, keep_snapshots=True, n_samples=5)
        mono = run(_config(profile, **kwargs))
        split = run(_config(profile, split_mode="split", **kwargs))
        assert split.final_state.F is not None
        a = mono.final_state.omega
        b = split.final_state.omega
        assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(a)
        assert np.linalg.norm(split.final_state.F) > 0


class TestEnergyBudget:
    @pytest.mark.slow
    def test_closure_is_second_order(self, couette):
        defects = []
        for dt in (0.02, 0.01):
            n = int(round(1.0 / dt))
            result = run(_config(couette, dt=dt, epsilon_amp=0.5, n_samples=n, budget=True))
            assert len(result.records) == n + 1
            defects.append(energy_closure(result.records))
        assert defects[1] <= defects[0] / 2.5

    @pytest.mark.slow
    @pytest.mark.parametrize("split_mode", ["monolithic", "split"])
    def test_bump_closure_is_second_order(self, split_mode):
        profile = ShearProfile.tanh_bump(Grid(8, 64, 8.0), 1e-2, 0.5, 1.0)
        defects = []
        for dt in (0.02, 0.01):
            n = int(round(1.0 / dt))
            cfg = _config(profile, dt=dt, epsilon_amp=0.5, n_samples=n, budget=True, split_mode=split_mode)
            result = run(cfg)
            assert len(result.records) == n + 1
            defects.append(energy_closure(result.records))
        last = result.records[-1]
        assert last.L1 != 0 and last.L2 != 0
        if split_mode == "split":
            assert last.L3 != 0 and last.Lfeed == 0
        else:
            assert last.Lfeed != 0 and last.L3 == 0
        assert 3.0 <= defects[0] / defects[1] <= 5.0

    def test_budget_terms_recorded(self, couette):
        result = run(_config(couette, epsilon_amp=0.5, budget=True))
        last = result.records[-1]
        assert last.D < 0
        assert last.NLa != 0
        assert last.Lfeed == 0 and last.L3 == 0

    def test_closure_needs_records(self, couette):
        result = run(_config(couette, n_samples=1))
        with pytest.raises(InvalidInputError):
            energy_closure(result.records)


class TestGuardsAndVerdicts:
    def test_tilt_guard(self):
        grid = Grid(16, 32, 8.0)
        with pytest.raises(InvalidInputError, match="tilt aliasing"):
            run(_config(ShearProfile.couette(grid, 1e-2), t_end=10.0))

    def test_linear_tilt_guard_uses_data_support(self):
        """A k = 1 datum only needs eta_max >= t_end."""
        grid = Grid(16, 32, 8.0)
        cfg = _config(ShearProfile.couette(grid, 1e-2), t_end=3.0, nonlinear=False, initial_field=single_mode(grid, 1))
        assert run(cfg).final_state.t == pytest.approx(3.0)

    def test_blowup_detected(self, couette):
        result = run(_config(couette, blowup_ratio=0.1))
        assert result.verdict is Verdict.BLOWUP
        assert result.blowup is not None
        assert result.final_state.t == 0.0

    def test_zero_amplitude_is_stable(self, couette):
        result = run(_config(couette, epsilon_amp=0.0))
        assert result.verdict is Verdict.STABLE

    def test_threshold_exceeded(self, couette):
        cfg = _config(couette, epsilon_amp=0.5)
        result = run(cfg)
        cfg.thresholds.short = 0.5
        verdict, details = evaluate_verdict(result.records, cfg)
        assert verdict is Verdict.THRESHOLD_EXCEEDED
        assert details["q_max"] >= 1.0

    def test_verdict_ignores_records_past_the_bootstrap_window(self, couette):
        records = [
            DiagnosticsRecord(t=t, A_omega_star_sq=a, zeta_pneq_sq=1.0) for t, a in ((0.0, 1.0), (1.0, 1.0), (2.0, 100.0))
        ]
        cfg = _config(couette)
        verdict, details = evaluate_verdict(records, cfg)
        assert verdict is Verdict.THRESHOLD_EXCEEDED
        assert details["horizon"] == pytest.approx(cfg.thresholds.c_star / couette.nu)
        cfg.thresholds.c_star = 1.5 * couette.nu
        verdict, details = evaluate_verdict(records, cfg)
        assert verdict is Verdict.STABLE
        assert details["horizon"] == pytest.approx(1.5)
        assert details["q_max"] == 1.0

    def test_large_data_lowers_dt_to_the_cfl_bound(self, couette):
        cfg = _config(couette, epsilon_amp=1e6, t_end=0.1, nonlinear=False, blowup_ratio=np.inf)
        result = run(cfg)
        assert result.final_state.t == pytest.approx(0.1)
        assert result.final_state.n_steps > 5
        assert result.records[0].cfl <= CFL_SAFETY * (1.0 + 1e-9)

    def test_small_data_keeps_the_configured_dt(self, couette):
        result = run(_config(couette, t_end=0.1))
        assert result.final_state.n_steps == 5
        assert result.records[0].cfl < CFL_SAFETY

    def test_diagnostics_csv(self, tmp_path, couette):
        result = run(_config(couette))
        path = result.write_diagnostics(tmp_path / "d.csv")
        header = path.read_text().splitlines()[0].split(",")
        assert header == DIAGNOSTICS_HEADER
        assert header[0] == "t"


class TestCheckpoint:
    def test_resume_continues_the_run(self, tmp_path):
        grid = Grid(8, 32, 8.0)
        profile = ShearProfile.tanh_bump(grid, 1e-2, 0.5, 1.0)
        first = run(_config(profile, t_end=0.2, dt=0.05, split_mode="split"))
        write_checkpoint(first.final_state, grid, tmp_path / "ckpt")
        state, read_grid = read_checkpoint(tmp_path / "ckpt")
        assert read_grid == grid
        assert state.t == pytest.approx(0.2)
        assert np.allclose(state.omega_star, first.final_state.omega_star, rtol=0, atol=1e-15)
        assert np.allclose(state.F, first.final_state.F, rtol=0, atol=1e-15)
        resumed = run(_config(profile, t_end=0.4, dt=0.05, split_mode="split"), resume=state)
        assert resumed.final_state.t == pytest.approx(0.4)
        assert resumed.records[0].t == pytest.approx(0.2)

    def test_resume_past_end_rejected(self, couette):
        first = run(_config(couette, t_end=0.1))
        with pytest.raises(InvalidInputError, match="past t_end"):
            run(_config(couette, t_end=0.1), resume=first.final_state)

    def test_unreadable_checkpoint(self, tmp_path):
        with pytest.raises(InvalidInputError, match="unreadable"):
            read_checkpoint(tmp_path)
