"""Closed-form Couette passive scalar and its decay functionals."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid, SpectralField

logger = logging.getLogger(__name__)


def dissipation_exponent(nu: float, t, k, eta):
    """nu * int_0^t (k^2 + (eta - k tau)^2) dtau, expanded as a polynomial in t."""
    t = np.asarray(t, dtype=float)
    k = np.asarray(k, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return nu * (k ** 2 * t + eta ** 2 * t - eta * k * t ** 2 + k ** 2 * t ** 3 / 3.0)


def dissipation_factor(nu: float, t, k, eta):
    return np.exp(-dissipation_exponent(nu, t, k, eta))


@dataclass
class PassiveScalarSolution:
    """F_hat(t) = F_in_hat * exp(-nu int_0^t (k^2 + (eta - k tau)^2) dtau) on a grid."""

    initial: SpectralField
    nu: float

    def __post_init__(self):
        if self.nu < 0:
            raise InvalidInputError(f"nu must be non-negative, got {self.nu}")

    @property
    def grid(self) -> Grid:
        return self.initial.grid

    def factor(self, t: float) -> np.ndarray:
        K, E = self.grid.mesh
        return dissipation_factor(self.nu, t, K, E)

    def coefficients(self, t: float) -> np.ndarray:
        return self.initial.coeffs * self.factor(t)


def exact_solution(sol: PassiveScalarSolution, t: float) -> SpectralField:
    return sol.initial.with_coeffs(sol.coefficients(t))


def single_mode(grid: Grid, k: int = 1, eta_index: int = 0, amplitude: complex = 1.0) -> SpectralField:
    """Real field with one Fourier pair at (k, eta_index) and its mirror."""
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[k % grid.n_z, eta_index % grid.n_v] = amplitude
    coeffs[-k % grid.n_z, -eta_index % grid.n_v] = np.conj(amplitude)
    return SpectralField(grid, coeffs)


def decay_bound_scan(
    sol: PassiveScalarSolution, times: Sequence[float], C: float = 2.0, delta: float = 1.0 / 8.0
) -> Dict[str, float]:
    """Worst |F(t)| / (C |F_in| exp(-delta nu^{1/3} t)) over k != 0 modes and times."""
    grid = sol.grid
    K, _ = grid.mesh
    active = (K != 0) & (np.abs(sol.initial.coeffs) > 0)
    worst = 0.0
    worst_t = float("nan")
    for t in times:
        bound = C * np.exp(-delta * sol.nu ** (1.0 / 3.0) * t)
        ratio = np.max(sol.factor(t)[active]) / bound if np.any(active) else 0.0
        if ratio > worst:
            worst, worst_t = float(ratio), float(t)
    return {"worst_ratio": worst, "worst_t": worst_t, "C": C, "delta": delta}


@dataclass
class DampingReport:
    times: np.ndarray
    hminus1_sq: np.ndarray
    integral: float
    bound: float

    @property
    def hminus1(self) -> np.ndarray:
        return np.sqrt(self.hminus1_sq)

    def pointwise_slope(self, t_min: float, t_max: float) -> float:
        mask = (self.times >= t_min) & (self.times <= t_max) & (self.hminus1 > 0)
        if np.count_nonzero(mask) < 2:
            raise InvalidInputError(f"fewer than two samples in [{t_min}, {t_max}]")
        return float(stats.linregress(np.log(self.times[mask]), np.log(self.hminus1[mask])).slope)


def hminus1_norm_sq(grid: Grid, coeffs: np.ndarray, t: float) -> float:
    """Sum over k != 0 of |f_hat|^2 / (k^2 + (eta - k t)^2), the moving-frame H^-1 norm squared."""
    K, E = grid.mesh
    nz = K != 0
    return float(np.sum(np.abs(coeffs[nz]) ** 2 / (K[nz] ** 2 + (E[nz] - K[nz] * t) ** 2)))


def damping_functionals(sol: PassiveScalarSolution, t_grid: Sequence[float]) -> DampingReport:
    """||P_neq f||_{H^-1}^2 along ``t_grid``, its trapezoid time integral and pi || |d_z|^-1 F_in ||^2."""
    times = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise InvalidInputError("t_grid must be strictly increasing")
    values = np.array([hminus1_norm_sq(sol.grid, sol.coefficients(t), t) for t in times])
    K, _ = sol.grid.mesh
    nz = K != 0
    bound = float(np.pi * np.sum(np.abs(sol.initial.coeffs[nz]) ** 2 / K[nz] ** 2))
    integral = float(integrate.trapezoid(values, times)) if times.size > 1 else 0.0
    return DampingReport(times, values, integral, bound)


@dataclass
class DecayFit:
    nu: float
    rate: float
    t_window: tuple


def norm_history(sol: PassiveScalarSolution, times: Sequence[float], k: Optional[int] = None) -> np.ndarray:
    """||P_neq f(t)|| (l2 of coefficients), optionally restricted to one |k|."""
    K, _ = sol.grid.mesh
    mask = (K != 0) if k is None else (np.abs(K) == k)
    return np.array([np.sqrt(np.sum(np.abs(sol.coefficients(t)[mask]) ** 2)) for t in times])


def fit_decay_rate(times: np.ndarray, norms: np.ndarray) -> float:
    """Exponential rate lambda in norms ~ exp(-lambda t), by least squares on log norms."""
    keep = norms > 0
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(-stats.linregress(times[keep], np.log(norms[keep])).slope)


def oracle_decay_rate(nu: float, grid: Grid, k: int = 1, n_samples: int = 40, window=(1.0, 5.0)) -> DecayFit:
    """Decay rate of the (k, 0) Couette mode over t in [a, b] * (nu k^2)^{-1/3}."""
    scale = (nu * k ** 2) ** (-1.0 / 3.0)
    times = np.linspace(window[0] * scale, window[1] * scale, n_samples)
    sol = PassiveScalarSolution(single_mode(grid, k), nu)
    rate = fit_decay_rate(times, norm_history(sol, times, k))
    return DecayFit(nu, rate, (float(times[0]), float(times[-1])))
