"""Stability-threshold sweeps: amplitude bisection per (profile, nu, seed) and the power-law fit."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from shearlab.core.config import Settings
from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid
from shearlab.core.io import write_table

logger = logging.getLogger(__name__)

PHASE_HEADER = ["profile", "nu", "seed", "status", "eps_star", "A_star", "monotone", "n_runs", "verdicts"]
MAX_N_V = 4096


@dataclass(frozen=True)
class SweepTask:
    """One bisection chain: fixed profile, viscosity and seed."""

    profile: str
    nu: float
    seed: int
    settings: Dict = field(hash=False, compare=False, repr=False)
    t_end_factor: float = 5.0

    @property
    def t_end(self) -> float:
        return self.t_end_factor * self.nu ** (-1.0 / 3.0)


@dataclass
class SweepPlan:
    settings: Settings
    nu_list: List[float]
    profiles: List[str]
    repetitions: int = 1
    amplitude_low: float = 0.01
    amplitude_high: float = 100.0
    scan_points: int = 5
    bisection_steps: int = 8
    t_end_factor: float = 5.0
    workers: int = 1
    output_dir: Path = Path("sweep-out")

    def __post_init__(self):
        if not self.nu_list or any(nu <= 0 for nu in self.nu_list):
            raise InvalidInputError(f"nu_list must hold positive values, got {self.nu_list}")
        if not 0 < self.amplitude_low < self.amplitude_high:
            raise InvalidInputError("need 0 < amplitude_low < amplitude_high")
        if self.scan_points < 2 or self.repetitions < 1:
            raise InvalidInputError("scan_points >= 2 and repetitions >= 1 required")
        if self.t_end_factor <= 0:
            raise InvalidInputError(f"t_end_factor must be positive, got {self.t_end_factor}")
        self.output_dir = Path(self.output_dir)

    @classmethod
    def from_settings(cls, settings: Settings) -> SweepPlan:
        sw = settings.sweep
        return cls(
            settings=settings,
            nu_list=[float(nu) for nu in sw.nu_list],
            profiles=list(sw.profiles),
            repetitions=int(sw.repetitions),
            amplitude_low=float(sw.amplitude_low),
            amplitude_high=float(sw.amplitude_high),
            scan_points=int(sw.scan_points),
            bisection_steps=int(sw.bisection_steps),
            t_end_factor=float(sw.t_end_factor),
            workers=int(sw.workers),
            output_dir=Path(sw.output_dir),
        )

    def tasks(self) -> List[SweepTask]:
        """Plan order: profile, then nu, then seed."""
        base_seed = int(self.settings.simulation.seed)
        raw = self.settings.to_dict()
        return [
            SweepTask(profile, nu, base_seed + rep, raw, self.t_end_factor)
            for profile, nu, rep in product(self.profiles, self.nu_list, range(self.repetitions))
        ]


@dataclass
class ThresholdRow:
    profile: str
    nu: float
    seed: int
    status: str
    eps_star: float
    monotone: bool
    amplitudes: List[float]
    verdicts: List[str]

    @property
    def A_star(self) -> float:
        return self.eps_star * self.nu ** (1.0 / 3.0)

    @property
    def bracketed(self) -> bool:
        return self.status == "bracketed"

    def to_row(self) -> List[object]:
        trail = " ".join(f"{a:.4g}:{v}" for a, v in zip(self.amplitudes, self.verdicts))
        return [
            self.profile, self.nu, self.seed, self.status, self.eps_star, self.A_star,
            int(self.monotone), len(self.verdicts), trail,
        ]


@dataclass
class PowerLawFit:
    slope: float
    intercept: float
    halfwidth: float
    n: int

    def contains(self, value: float) -> bool:
        return abs(self.slope - value) <= self.halfwidth


@dataclass
class SweepReport:
    rows: List[ThresholdRow]
    fit: Optional[PowerLawFit]

    @property
    def monotone_fraction(self) -> float:
        return float(np.mean([r.monotone for r in self.rows])) if self.rows else 1.0

    @property
    def no_threshold(self) -> bool:
        return all(r.status == "no-threshold" for r in self.rows)

    def write(self, path) -> Path:
        return write_table(path, PHASE_HEADER, [r.to_row() for r in self.rows])


Runner = Callable[[SweepTask, float], str]


def resolved_grid(grid: Grid, t_end: float, max_n_v: int = MAX_N_V) -> Grid:
    """Double n_v until the tilt k t_end stays inside the retained eta band."""
    while grid.k_retained_max * t_end > grid.eta_retained_max:
        if grid.n_v >= max_n_v:
            raise InvalidInputError(f"t_end={t_end:g} needs more than n_v={max_n_v} on this box")
        grid = grid.refined()
    return grid


def simulate_verdict(task: SweepTask, epsilon: float) -> str:
    """Verdict of one nonlinear run with amplitude ``epsilon`` over the task horizon."""
    from shearlab.core.profile import load_profile
    from shearlab.core.simulator import run

    settings = Settings.from_dict(task.settings)
    t_end = task.t_end
    grid = resolved_grid(settings.grid.build(), t_end)
    if grid.n_v != settings.grid.n_v:
        logger.debug(f"nu={task.nu:g}: n_v raised to {grid.n_v} for t_end={t_end:.3g}")
    profile = load_profile(task.profile, grid, task.nu)
    config = settings.simulation_config(
        profile=profile, epsilon_amp=epsilon, seed=task.seed, t_end=t_end, budget=False
    )
    return run(config).verdict.value


def _is_stable(verdict: str) -> bool:
    return verdict == "stable"


def threshold_chain(task: SweepTask, plan: SweepPlan, runner: Runner = simulate_verdict) -> ThresholdRow:
    """Log-spaced scan, then log-space bisection on the first stable-to-unstable bracket."""
    scan = list(np.geomspace(plan.amplitude_low, plan.amplitude_high, plan.scan_points))
    verdicts = [runner(task, eps) for eps in scan]
    amplitudes = list(scan)
    stable = [_is_stable(v) for v in verdicts]
    first_bad = next((i for i, ok in enumerate(stable) if not ok), None)
    monotone = first_bad is None or not any(stable[first_bad:])
    if not monotone:
        logger.warning(f"Non-monotone verdicts for {task.profile} nu={task.nu:g} seed={task.seed}: {verdicts}")

    if first_bad is None:
        return ThresholdRow(task.profile, task.nu, task.seed, "no-threshold", float("inf"), True, amplitudes, verdicts)
    if first_bad == 0:
        return ThresholdRow(task.profile, task.nu, task.seed, "all-unstable", float("nan"), monotone, amplitudes, verdicts)

    lo, hi = np.log(scan[first_bad - 1]), np.log(scan[first_bad])
    for _ in range(plan.bisection_steps):
        mid = 0.5 * (lo + hi)
        verdict = runner(task, float(np.exp(mid)))
        amplitudes.append(float(np.exp(mid)))
        verdicts.append(verdict)
        if _is_stable(verdict):
            lo = mid
        else:
            hi = mid
    eps_star = float(np.exp(0.5 * (lo + hi)))
    logger.info(f"{task.profile} nu={task.nu:g} seed={task.seed}: eps* = {eps_star:.4g}")
    return ThresholdRow(task.profile, task.nu, task.seed, "bracketed", eps_star, monotone, amplitudes, verdicts)


def fit_power_law(nu: Sequence[float], A: Sequence[float], confidence: float = 0.95) -> PowerLawFit:
    """Least squares log A = beta log nu + c with a Student-t half-width on beta."""
    x = np.log(np.asarray(nu, dtype=float))
    y = np.log(np.asarray(A, dtype=float))
    if x.size < 2 or np.ptp(x) == 0:
        raise InvalidInputError("need at least two distinct viscosities to fit a power law")
    res = stats.linregress(x, y)
    if x.size > 2:
        halfwidth = float(stats.t.ppf(0.5 + confidence / 2.0, x.size - 2) * res.stderr)
    else:
        halfwidth = float("inf")
    return PowerLawFit(float(res.slope), float(res.intercept), halfwidth, int(x.size))


def _chain_worker(args) -> ThresholdRow:
    task, plan = args
    return threshold_chain(task, plan)


def sweep_threshold(plan: SweepPlan, runner: Optional[Runner] = None) -> SweepReport:
    """Bisect every chain of the plan and fit A* against nu over the bracketed rows."""
    tasks = plan.tasks()
    logger.info(f"Sweep: {len(tasks)} chains, {plan.workers} worker(s)")
    if runner is not None or plan.workers <= 1:
        rows = [threshold_chain(task, plan, runner or simulate_verdict) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            rows = list(pool.map(_chain_worker, [(task, plan) for task in tasks]))

    bracketed = [r for r in rows if r.bracketed]
    fit = None
    if len({r.nu for r in bracketed}) >= 2:
        fit = fit_power_law([r.nu for r in bracketed], [r.A_star for r in bracketed])
        logger.info(f"Fitted threshold exponent {fit.slope:.3f} +/- {fit.halfwidth:.3f}")
    elif not bracketed:
        logger.info("No threshold found: every chain stayed stable or started unstable")
    return SweepReport(rows, fit)
