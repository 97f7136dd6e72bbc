"""
Tests for threshold sweeps.

Validates:
- Bisection recovers a planted threshold eps* = c nu^{beta - 1/3}
- The power-law fit recovers beta
- Chains that never or always fail, and non-monotone verdict sequences
- Grid refinement keeps sweep horizons inside the retained band
"""

from types import SimpleNamespace

import numpy as np
import pytest

from shearlab.core.config import Settings
from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid
from shearlab.core.simulator import Verdict
from shearlab.services.sweep import (
    PHASE_HEADER,
    SweepPlan,
    SweepTask,
    fit_power_law,
    resolved_grid,
    simulate_verdict,
    sweep_threshold,
    threshold_chain,
)


def _plan(tmp_path, **kwargs):
    base = dict(
        settings=Settings.from_dict({}),
        nu_list=[1e-3, 1e-4, 1e-5],
        profiles=["couette"],
        bisection_steps=20,
        output_dir=tmp_path / "sweep",
    )
    base.update(kwargs)
    return SweepPlan(**base)


def planted(beta, c=1.0):
    def runner(task, eps):
        return "stable" if eps < c * task.nu ** (beta - 1.0 / 3.0) else "threshold-exceeded"

    return runner


class TestPlan:
    def test_rejects_bad_plans(self, tmp_path):
        with pytest.raises(InvalidInputError):
            _plan(tmp_path, nu_list=[])
        with pytest.raises(InvalidInputError):
            _plan(tmp_path, amplitude_low=10.0, amplitude_high=1.0)
        with pytest.raises(InvalidInputError):
            _plan(tmp_path, scan_points=1)
        with pytest.raises(InvalidInputError):
            _plan(tmp_path, t_end_factor=0.0)

    def test_task_order(self, tmp_path):
        plan = _plan(tmp_path, profiles=["couette", "tanh-bump:0.5,1"], repetitions=2)
        tasks = plan.tasks()
        assert len(tasks) == 12
        assert (tasks[0].profile, tasks[0].nu, tasks[0].seed) == ("couette", 1e-3, 0)
        assert tasks[1].seed == 1
        assert tasks[-1].profile == "tanh-bump:0.5,1"

    def test_from_settings(self):
        plan = SweepPlan.from_settings(Settings.from_dict({"sweep": {"nu_list": [1e-2, 1e-3], "workers": 3}}))
        assert plan.nu_list == [1e-2, 1e-3]
        assert plan.workers == 3

    def test_tasks_carry_the_plan_horizon(self, tmp_path):
        plan = _plan(tmp_path, nu_list=[1e-3], t_end_factor=1.0)
        task = plan.tasks()[0]
        assert task.t_end_factor == 1.0
        assert task.t_end == pytest.approx(10.0)

    def test_runner_receives_the_plan_horizon(self, tmp_path, monkeypatch):
        seen = {}

        def fake_run(config):
            seen["t_end"] = config.t_end
            seen["epsilon"] = config.epsilon_amp
            return SimpleNamespace(verdict=Verdict.STABLE)

        monkeypatch.setattr("shearlab.core.simulator.run", fake_run)
        plan = _plan(tmp_path, nu_list=[1e-3], t_end_factor=1.0)
        assert simulate_verdict(plan.tasks()[0], 0.25) == "stable"
        assert seen["t_end"] == pytest.approx(10.0)
        assert seen["epsilon"] == 0.25


class TestThresholdChain:
    def test_bisection_finds_planted_threshold(self, tmp_path):
        plan = _plan(tmp_path)
        row = threshold_chain(SweepTask("couette", 1e-4, 0, {}), plan, planted(0.5))
        assert row.status == "bracketed"
        assert row.monotone
        assert row.eps_star == pytest.approx(1e-4 ** (0.5 - 1.0 / 3.0), rel=1e-4)
        assert row.A_star == pytest.approx(1e-2, rel=1e-4)
        assert len(row.verdicts) == plan.scan_points + plan.bisection_steps

    def test_never_fails(self, tmp_path):
        row = threshold_chain(SweepTask("couette", 1e-4, 0, {}), _plan(tmp_path), lambda task, eps: "stable")
        assert row.status == "no-threshold"
        assert row.eps_star == np.inf

    def test_always_fails(self, tmp_path):
        row = threshold_chain(SweepTask("couette", 1e-4, 0, {}), _plan(tmp_path), lambda task, eps: "blow-up")
        assert row.status == "all-unstable"
        assert np.isnan(row.eps_star)

    def test_non_monotone_is_flagged(self, tmp_path):
        def runner(task, eps):
            return "threshold-exceeded" if 0.05 < eps < 2.0 else "stable"

        row = threshold_chain(SweepTask("couette", 1e-4, 0, {}), _plan(tmp_path), runner)
        assert not row.monotone
        assert row.status == "bracketed"


class TestPowerLaw:
    def test_exact_line(self):
        nu = np.array([1e-3, 1e-4, 1e-5, 1e-6])
        fit = fit_power_law(nu, 3.0 * nu ** 0.75)
        assert fit.slope == pytest.approx(0.75)
        assert np.exp(fit.intercept) == pytest.approx(3.0)
        assert fit.contains(0.75)

    def test_two_points_have_no_interval(self):
        fit = fit_power_law([1e-3, 1e-4], [1.0, 0.5])
        assert fit.halfwidth == np.inf

    def test_needs_two_viscosities(self):
        with pytest.raises(InvalidInputError):
            fit_power_law([1e-3], [1.0])
        with pytest.raises(InvalidInputError):
            fit_power_law([1e-3, 1e-3], [1.0, 2.0])


class TestSweep:
    def test_recovers_exponent(self, tmp_path):
        report = sweep_threshold(_plan(tmp_path), planted(0.5))
        assert report.fit is not None
        assert report.fit.slope == pytest.approx(0.5, abs=0.01)
        assert report.monotone_fraction == 1.0

    def test_no_threshold_report(self, tmp_path):
        report = sweep_threshold(_plan(tmp_path), lambda task, eps: "stable")
        assert report.no_threshold
        assert report.fit is None

    def test_phase_table(self, tmp_path):
        report = sweep_threshold(_plan(tmp_path), planted(0.5))
        path = report.write(tmp_path / "phase.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(PHASE_HEADER)
        assert len(lines) == 4
        assert lines[1].startswith("couette,")


class TestResolvedGrid:
    def test_keeps_resolved_grid(self):
        grid = Grid(8, 64, np.pi)
        assert resolved_grid(grid, 10.0) is grid

    def test_doubles_n_v(self):
        refined = resolved_grid(Grid(8, 64, np.pi), 20.0)
        assert refined.n_v == 128
        assert refined.k_retained_max * 20.0 <= refined.eta_retained_max

    def test_refuses_beyond_cap(self):
        with pytest.raises(InvalidInputError, match="needs more than"):
            resolved_grid(Grid(8, 64, np.pi), 20.0, max_n_v=64)
