"""Named experiments: enhanced-dissipation rates and inviscid-damping functionals."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from shearlab.core.config import Settings
from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid, SpectralField
from shearlab.core.io import write_csv
from shearlab.core.oracles import (
    PassiveScalarSolution,
    damping_functionals,
    fit_decay_rate,
    oracle_decay_rate,
    single_mode,
)

logger = logging.getLogger(__name__)

DISSIPATION_HEADER = ["nu", "k", "rate", "t_min", "t_max"]
DAMPING_HEADER = ["nu", "integral", "bound", "slope"]
FIT_WINDOW = (1.0, 5.0)


@dataclass
class DissipationRow:
    nu: float
    k: int
    rate: float
    t_min: float
    t_max: float

    def to_row(self) -> List[float]:
        return [self.nu, self.k, self.rate, self.t_min, self.t_max]


@dataclass
class DissipationReport:
    rows: List[DissipationRow]
    slope: float
    k_ratios: Dict[int, float] = field(default_factory=dict)
    source: str = "oracle"

    def rates(self, k: int) -> np.ndarray:
        return np.array([r.rate for r in self.rows if r.k == k])

    def write(self, path) -> Path:
        return write_csv(path, DISSIPATION_HEADER, [r.to_row() for r in self.rows])


def fit_window(nu: float, k: int, window=FIT_WINDOW) -> tuple:
    scale = (nu * k ** 2) ** (-1.0 / 3.0)
    return window[0] * scale, window[1] * scale


def simulated_decay_rate(
    settings: Settings, nu: float, k: int = 1, n_samples: int = 40, profile_spec: Optional[str] = None
) -> DissipationRow:
    """Linear run from a single (k, 0) mode; rate fitted on ||P_k Omega|| over the window."""
    from shearlab.core.profile import load_profile
    from shearlab.core.simulator import run

    grid = settings.grid.build()
    t_min, t_max = fit_window(nu, k)
    profile = load_profile(profile_spec or settings.profile.spec, grid, nu)
    config = settings.simulation_config(
        profile=profile,
        t_end=t_max,
        nonlinear=False,
        budget=False,
        keep_snapshots=True,
        n_samples=max(n_samples * 5 // 4, 2),
        initial_field=single_mode(grid, k),
    )
    result = run(config)
    K, _ = grid.mesh
    rows = np.abs(K) == k
    times = np.array([t for t, _ in result.snapshots])
    norms = np.array([np.sqrt(np.sum(np.abs(f.coeffs[rows]) ** 2)) for _, f in result.snapshots])
    keep = (times >= t_min - 1e-9) & (times <= t_max + 1e-9)
    rate = fit_decay_rate(times[keep], norms[keep])
    logger.debug(f"simulated rate nu={nu:g} k={k}: {rate:.4g}")
    return DissipationRow(nu, k, rate, t_min, t_max)


def measure_enhanced_dissipation(
    nu_list: Sequence[float],
    grid: Optional[Grid] = None,
    k_list: Sequence[int] = (1,),
    source: str = "oracle",
    settings: Optional[Settings] = None,
    profile_spec: Optional[str] = None,
    n_samples: int = 40,
) -> DissipationReport:
    """Decay rates lambda(nu, k) and the slope of log lambda against log nu at the first k."""
    if len(nu_list) < 2:
        raise InvalidInputError("need at least two viscosities")
    if source not in ("oracle", "simulation"):
        raise InvalidInputError(f"unknown source {source!r}")
    if source == "simulation" and settings is None:
        raise InvalidInputError("simulation source needs settings")
    if grid is None:
        grid = settings.grid.build() if settings is not None else Grid(16, 32, np.pi)
    rows: List[DissipationRow] = []
    for nu in nu_list:
        for k in k_list:
            if source == "oracle":
                fit = oracle_decay_rate(nu, grid, k, n_samples, FIT_WINDOW)
                rows.append(DissipationRow(nu, k, fit.rate, *fit.t_window))
            else:
                rows.append(simulated_decay_rate(settings, nu, k, n_samples, profile_spec))
            logger.info(f"nu={nu:g} k={k}: rate {rows[-1].rate:.4g}")

    k0 = k_list[0]
    nus = np.array([r.nu for r in rows if r.k == k0])
    slope = float(stats.linregress(np.log(nus), np.log(np.array([r.rate for r in rows if r.k == k0]))).slope)
    nu_min = min(nu_list)
    base = next(r.rate for r in rows if r.k == k0 and r.nu == nu_min)
    ratios = {r.k: r.rate / base for r in rows if r.nu == nu_min}
    return DissipationReport(rows, slope, ratios, source)


@dataclass
class DampingRow:
    nu: float
    integral: float
    bound: float
    slope: float

    def to_row(self) -> List[float]:
        return [self.nu, self.integral, self.bound, self.slope]


@dataclass
class DampingSummary:
    rows: List[DampingRow]

    @property
    def spread(self) -> float:
        """(max - min) / max of the time integrals across viscosities."""
        values = np.array([r.integral for r in self.rows])
        if values.size == 0 or np.max(values) == 0:
            return 0.0
        return float((np.max(values) - np.min(values)) / np.max(values))

    @property
    def within_bound(self) -> bool:
        return all(r.integral <= r.bound * (1.0 + 1e-12) for r in self.rows)

    def write(self, path) -> Path:
        return write_csv(path, DAMPING_HEADER, [r.to_row() for r in self.rows])


def default_time_grid(t_max: float = 1e4, n: int = 4000) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-3, t_max, n)])


def measure_inviscid_damping(
    nu_list: Sequence[float],
    initial: Optional[SpectralField] = None,
    t_grid: Optional[Sequence[float]] = None,
    slope_window=(10.0, 100.0),
) -> DampingSummary:
    """H^-1 integral, its bound and the pointwise decay slope of the oracle for each nu."""
    initial = initial if initial is not None else single_mode(Grid(8, 16, np.pi), 1)
    times = default_time_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    rows = []
    for nu in nu_list:
        report = damping_functionals(PassiveScalarSolution(initial, nu), times)
        try:
            slope = report.pointwise_slope(*slope_window)
        except InvalidInputError:
            slope = float("nan")
        rows.append(DampingRow(nu, report.integral, report.bound, slope))
        logger.info(f"nu={nu:g}: integral {report.integral:.5g} (bound {report.bound:.5g}), slope {slope:.3f}")
    return DampingSummary(rows)


@dataclass
class VelocityDecay:
    slope_u1: float
    slope_u2: float
    integral: float


def velocity_decay(records, t_min: float, t_max: float) -> VelocityDecay:
    """Power-law slopes of ||P_neq u1|| and ||u2|| over [t_min, t_max] from simulator diagnostics."""
    times = np.array([r.t for r in records])
    u1 = np.array([r.u1_pneq_l2 for r in records])
    u2 = np.array([r.u2_l2 for r in records])
    integral = records[-1].u_pneq_integral if records else 0.0

    def slope(values):
        keep = (times >= t_min) & (times <= t_max) & (values > 0)
        if np.count_nonzero(keep) < 2:
            return float("nan")
        return float(stats.linregress(np.log(times[keep]), np.log(values[keep])).slope)

    return VelocityDecay(slope(u1), slope(u2), float(integral))
