"""Moving-frame vorticity simulator with the zero-mode velocity and energy diagnostics.

The state lives in Fourier coefficients on the dealiased grid. Per step,
nu Delta_L is integrated exactly through its Fourier factor; everything else
(the variable-coefficient diffusion remainder, the nonlocal b'' term and the
transport terms) is explicit and dealiased. In split mode the vorticity is
carried as Omega = F + Omega*, with F the linear profile; the two pieces use
the same factor so their sum reproduces the monolithic run.

Inner products and the multiplier norms are l2 sums over retained
coefficients. Sobolev and L2 norms reported as physical quantities carry the
box area through Parseval.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, linalg

from shearlab.core.elliptic import operator_matrix, solve_zero_mode
from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import Grid, Operator, SpectralField
from shearlab.core.io import read_field, write_csv, write_field
from shearlab.core.multipliers import M_parts, MultiplierSpec, dt_log_zeta, ck_weight, eval_zeta, multiplier_grid
from shearlab.core.oracles import dissipation_exponent
from shearlab.core.profile import ShearProfile

logger = logging.getLogger(__name__)

SHAPE_DECAY = 1.6
CFL_SAFETY = 1.0


class SplitMode(Enum):
    MONOLITHIC = "monolithic"
    SPLIT = "split"


class Verdict(Enum):
    STABLE = "stable"
    THRESHOLD_EXCEEDED = "threshold-exceeded"
    BLOWUP = "blow-up"


@dataclass
class BootstrapThresholds:
    short: float = 8.0
    C1: float = 4.0
    u1: float = 8.0
    low_regularity: float = 16.0
    c_star: float = 0.05


@dataclass
class SimulationConfig:
    profile: ShearProfile
    dt: float
    t_end: float
    s: float = 2.0
    epsilon_amp: float = 1e-3
    seed: int = 0
    split_mode: SplitMode = SplitMode.MONOLITHIC
    multiplier: Optional[MultiplierSpec] = None
    nonlinear: bool = True
    background: bool = True
    scheme: str = "ifab2"
    n_samples: int = 50
    budget: bool = True
    thresholds: BootstrapThresholds = field(default_factory=BootstrapThresholds)
    blowup_ratio: float = 1e6
    initial_field: Optional[SpectralField] = None
    initial_u1: Optional[np.ndarray] = None
    keep_snapshots: bool = False

    def __post_init__(self):
        self.split_mode = SplitMode(self.split_mode)
        if self.scheme not in ("ifab2", "cnab2"):
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0 or not self.t_end > 0:
            raise InvalidInputError(f"dt and t_end must be positive, got {self.dt}, {self.t_end}")
        if self.epsilon_amp < 0:
            raise InvalidInputError(f"epsilon_amp must be non-negative, got {self.epsilon_amp}")
        if self.multiplier is None:
            self.multiplier = MultiplierSpec(self.nu, s=self.s)

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    @property
    def nu(self) -> float:
        return self.profile.nu

    @property
    def split(self) -> bool:
        return self.split_mode is SplitMode.SPLIT


@dataclass
class SimulationState:
    t: float
    omega_star: np.ndarray
    u1: np.ndarray
    F: Optional[np.ndarray] = None
    n_steps: int = 0
    previous: Optional[Tuple[np.ndarray, ...]] = field(default=None, repr=False)
    previous_t: Optional[float] = None

    @property
    def omega(self) -> np.ndarray:
        return self.omega_star if self.F is None else self.F + self.omega_star

    def unknowns(self) -> Tuple[np.ndarray, ...]:
        if self.F is None:
            return (self.omega_star, self.u1)
        return (self.omega_star, self.F, self.u1)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(x)) for x in self.unknowns())


@dataclass
class DiagnosticsRecord:
    t: float = 0.0
    A_omega_star_sq: float = 0.0
    A_F_sq: float = 0.0
    zeta_pneq_sq: float = 0.0
    u1_sq: float = 0.0
    ck_nu: float = 0.0
    ck_I: float = 0.0
    ck_E: float = 0.0
    ck_nu_F: float = 0.0
    ck_I_F: float = 0.0
    ck_E_F: float = 0.0
    dissipation_sq: float = 0.0
    CKM: float = 0.0
    Zgrowth: float = 0.0
    D: float = 0.0
    NL0a: float = 0.0
    NLa: float = 0.0
    NL0l: float = 0.0
    NLl: float = 0.0
    L1: float = 0.0
    L2: float = 0.0
    L3: float = 0.0
    Lfeed: float = 0.0
    hs_norm: float = 0.0
    ed_norm: float = 0.0
    u_pneq_hs_sq: float = 0.0
    u_pneq_integral: float = 0.0
    u1_pneq_l2: float = 0.0
    u2_l2: float = 0.0
    consistency_defect: float = 0.0
    u1_forcing_l2: float = 0.0
    u1_forcing_integral: float = 0.0
    cfl: float = 0.0

    @property
    def half_energy(self) -> float:
        return 0.5 * self.A_omega_star_sq

    @property
    def budget_sum(self) -> float:
        """Right-hand side of d/dt (1/2 ||A Omega*||^2)."""
        return (
            -self.CKM + self.Zgrowth + self.D - self.NL0a - self.NLa - self.NL0l - self.NLl
            - self.L1 - self.L2 - self.L3 + self.Lfeed
        )

    def to_row(self) -> List[float]:
        return [getattr(self, name) for name in DIAGNOSTICS_HEADER]


DIAGNOSTICS_HEADER = [f.name for f in fields(DiagnosticsRecord)]


@dataclass
class Coefficients:
    B: np.ndarray
    Bp: np.ndarray
    B0: np.ndarray
    B0p: np.ndarray

    @property
    def flat(self) -> bool:
        return not np.any(self.Bp) and np.all(self.B == 1.0)

    @property
    def flat0(self) -> bool:
        return not np.any(self.B0p) and np.all(self.B0 == 1.0)


class Simulator:
    def __init__(self, config: SimulationConfig):
        self.config = config
        self.grid = config.grid
        self.nu = config.nu
        self.spec = config.multiplier
        self.profile = config.profile.initial
        self.K, self.E = self.grid.mesh
        self.mask = self.grid.dealias_mask
        self._size = self.grid.n_z * self.grid.n_v
        self._lu: Dict[tuple, list] = {}
        self._coefficients: Dict[float, Coefficients] = {}
        k_idx = np.nonzero((self.grid.k > 0) & (self.grid.k <= self.grid.k_retained_max))[0]
        self._positive_rows = [(int(i), int(self.grid.k[i])) for i in k_idx]
        self._mirror_eta = (-np.arange(self.grid.n_v)) % self.grid.n_v
        self._cfl_warned = False

    # spectral helpers

    def _dealias(self, c):
        return np.where(self.mask, c, 0.0)

    def _physical(self, c):
        return np.fft.ifft2(c).real * self._size

    def _spectral(self, p):
        return np.fft.fft2(p) / self._size

    def _tilt(self, c, t):
        return 1j * (self.E - self.K * t) * c

    def _dz(self, c):
        return 1j * self.K * c

    def _times_v(self, c, f):
        """Multiply by a function of v, dealiased."""
        return self._dealias(self.grid.v_to_coeffs(f[None, :] * self.grid.coeffs_to_v(c)))

    def coefficients_at(self, t: float) -> Coefficients:
        cached = self._coefficients.get(t)
        if cached is not None:
            return cached
        n = self.grid.n_v
        if not self.config.background:
            ones, zeros = np.ones(n), np.zeros(n)
            co = Coefficients(ones, zeros, ones, zeros)
        else:
            B, Bp = self.profile.at(t).coefficient_B()
            B0, B0p = self.profile.coefficient_B()
            co = Coefficients(B, Bp, B0, B0p)
        if len(self._coefficients) > 4:
            self._coefficients.pop(next(iter(self._coefficients)))
        self._coefficients[t] = co
        return co

    # elliptic inversions per k

    def _factors(self, tag: str, t: float, B2: np.ndarray, B1: np.ndarray) -> list:
        key = (tag, t)
        lus = self._lu.get(key)
        if lus is None:
            if len(self._lu) > 6:
                self._lu.pop(next(iter(self._lu)))
            lus = [linalg.lu_factor(operator_matrix(self.grid, k, t, B2, B1)) for _, k in self._positive_rows]
            self._lu[key] = lus
        return lus

    def _invert(self, c: np.ndarray, t: float, B2: np.ndarray, B1: np.ndarray, tag: str, flat: bool) -> np.ndarray:
        """Per-k inverse of B2 T^2 + B1 T + d_z^2 on P_neq c; real fields only."""
        if flat:
            return c * self.grid.symbol(Operator.INV_LAPLACE, t)
        out = np.zeros_like(c)
        lus = self._factors(tag, t, B2, B1)
        for lu, (i, _) in zip(lus, self._positive_rows):
            row = self.grid.v_to_coeffs(linalg.lu_solve(lu, self.grid.coeffs_to_v(c[i])))
            out[i] = row
            out[-i] = np.conj(row[self._mirror_eta])
        return out

    def stream_function(self, omega: np.ndarray, t: float, co: Coefficients) -> np.ndarray:
        """Psi = Delta_t^{-1} P_neq Omega."""
        return self._invert(omega, t, co.B ** 2, co.Bp, "lap_t", co.flat)

    def _inverse_lap0(self, omega: np.ndarray, t: float, co: Coefficients) -> np.ndarray:
        return self._invert(omega, t, co.B0 ** 2, co.B0p, "lap_0", co.flat0)

    # transport pieces

    def _transport(self, target: np.ndarray, psi: np.ndarray, t: float, co: Coefficients) -> np.ndarray:
        """B grad_L^perp Psi . grad_L target."""
        inner = -self._physical(self._tilt(psi, t)) * self._physical(self._dz(target)) + self._physical(
            self._dz(psi)
        ) * self._physical(self._tilt(target, t))
        return self._dealias(self._spectral(co.B[None, :] * inner))

    def _transport_zero(self, target: np.ndarray, u1: np.ndarray) -> np.ndarray:
        """U1 d_z target."""
        U = self.grid.coeffs_to_v(u1).real
        return self._dealias(self._spectral(U[None, :] * self._physical(self._dz(target))))

    def _u1_forcing(self, psi: np.ndarray, t: float, co: Coefficients) -> np.ndarray:
        """P_0 (B grad_L^perp Psi . grad_L (B T Psi)) as v coefficients."""
        w = self._dealias(self._spectral(co.B[None, :] * self._physical(self._tilt(psi, t))))
        return self._transport(w, psi, t, co)[0]

    # right-hand sides

    def _omega_explicit(self, t: float, omega: np.ndarray, u1: np.ndarray, co: Coefficients):
        psi = self.stream_function(omega, t, co)
        N = np.zeros_like(omega)
        if not co.flat:
            N += self.nu * self._times_v(self._tilt(self._tilt(omega, t), t), co.B ** 2 - 1.0)
            N += self._times_v(self._dz(psi), co.Bp)
        if self.config.nonlinear:
            N -= self._transport_zero(omega, u1) + self._transport(omega, psi, t, co)
        return self._dealias(N), psi

    def _u1_explicit(self, t: float, u1: np.ndarray, psi: np.ndarray, co: Coefficients) -> np.ndarray:
        eta = self.grid.eta
        N = np.zeros_like(u1)
        if not co.flat:
            U_vv = self.grid.coeffs_to_v(-(eta ** 2) * u1)
            N += self.grid.v_to_coeffs(self.nu * (co.B ** 2 - 1.0) * U_vv)
        if self.config.nonlinear:
            N += self._u1_forcing(psi, t, co)
        return np.where(self.mask[0], N, 0.0)

    def _F_explicit(self, t: float, F: np.ndarray, omega: np.ndarray, co: Coefficients) -> np.ndarray:
        """nu (Delta_0 - Delta_L) F + B0' d_z Delta_0^{-1} P_neq Omega."""
        if co.flat0:
            return np.zeros_like(F)
        TF = self._tilt(F, t)
        N = self.nu * (self._times_v(self._tilt(TF, t), co.B0 ** 2 - 1.0) + self._times_v(TF, co.B0p))
        N += self._times_v(self._dz(self._inverse_lap0(omega, t, co)), co.B0p)
        return self._dealias(N)

    def explicit(self, t: float, state_vars: Tuple[np.ndarray, ...]) -> Tuple[np.ndarray, ...]:
        co = self.coefficients_at(t)
        if self.config.split:
            omega_star, F, u1 = state_vars
            N_omega, psi = self._omega_explicit(t, omega_star + F, u1, co)
            N_F = self._F_explicit(t, F, omega_star + F, co)
            return (N_omega - N_F, N_F, self._u1_explicit(t, u1, psi, co))
        omega, u1 = state_vars
        N_omega, psi = self._omega_explicit(t, omega, u1, co)
        return (N_omega, self._u1_explicit(t, u1, psi, co))

    # time stepping

    def _exponents(self, t: float):
        mesh = dissipation_exponent(self.nu, t, self.K, self.E)
        zero = dissipation_exponent(self.nu, t, 0.0, self.grid.eta)
        return mesh, zero

    def _ratios(self, t0: float, t1: float) -> Tuple[np.ndarray, ...]:
        m0, z0 = self._exponents(t0)
        m1, z1 = self._exponents(t1)
        r_mesh, r_zero = np.exp(-(m1 - m0)), np.exp(-(z1 - z0))
        return (r_mesh, r_mesh, r_zero) if self.config.split else (r_mesh, r_zero)

    def _rates(self, t: float) -> Tuple[np.ndarray, ...]:
        mesh = self.nu * (self.K ** 2 + (self.E - self.K * t) ** 2)
        zero = self.nu * self.grid.eta ** 2
        return (mesh, mesh, zero) if self.config.split else (mesh, zero)

    def _pack(self, state: SimulationState, t: float, values, previous, previous_t) -> SimulationState:
        if self.config.split:
            omega_star, F, u1 = values
        else:
            (omega_star, u1), F = values, None
        return SimulationState(t, omega_star, u1, F, state.n_steps + 1, previous, previous_t)

    def step(self, state: SimulationState, dt: float) -> SimulationState:
        t0, t1 = state.t, state.t + dt
        X0 = state.unknowns()
        N0 = self.explicit(t0, X0)
        if self.config.scheme == "ifab2":
            r1 = self._ratios(t0, t1)
            if state.previous is None:
                pred = tuple(r * (x + dt * n) for r, x, n in zip(r1, X0, N0))
                N1 = self.explicit(t1, pred)
                X1 = tuple(r * (x + 0.5 * dt * n) + 0.5 * dt * m for r, x, n, m in zip(r1, X0, N0, N1))
            else:
                r0 = self._ratios(state.previous_t, t0)
                X1 = tuple(
                    r * (x + dt * (1.5 * n - 0.5 * q * p))
                    for r, q, x, n, p in zip(r1, r0, X0, N0, state.previous)
                )
        else:
            lam1 = self._rates(t1)
            if state.previous is None:
                X1 = tuple((x + dt * n) / (1.0 + dt * l1) for x, n, l1 in zip(X0, N0, lam1))
            else:
                lam0 = self._rates(t0)
                X1 = tuple(
                    (x * (1.0 - 0.5 * dt * l0) + dt * (1.5 * n - 0.5 * p)) / (1.0 + 0.5 * dt * l1)
                    for x, n, p, l0, l1 in zip(X0, N0, state.previous, lam0, lam1)
                )
        return self._pack(state, t1, X1, N0, t0)

    # initial data

    def initial_state(self) -> SimulationState:
        omega, u1 = init_data(self.config)
        F = np.zeros_like(omega.coeffs) if self.config.split else None
        return SimulationState(0.0, omega.coeffs.copy(), u1, F)

    def check_tilt(self, state: SimulationState):
        """Refuse horizons where the tilt eta - k t would leave the retained band."""
        if self.config.nonlinear:
            k_max = self.grid.k_retained_max
        else:
            support = np.any(state.omega != 0, axis=1)
            k_max = float(np.max(np.abs(self.grid.k[support]))) if np.any(support) else 0.0
        if k_max * self.config.t_end > self.grid.eta_retained_max:
            raise InvalidInputError(
                f"tilt aliasing: k_max * t_end = {k_max * self.config.t_end:.4g} exceeds the retained "
                f"eta band {self.grid.eta_retained_max:.4g}; refine n_v, enlarge L_v or shorten t_end"
            )

    # CFL

    @property
    def cell(self) -> float:
        return min(2.0 * np.pi / self.grid.n_z, self.grid.h)

    def _speed(self, u1_hat: np.ndarray, u2_hat: np.ndarray, U: np.ndarray) -> float:
        return float(
            max(np.max(np.abs(self._physical(u1_hat))) + np.max(np.abs(U)), np.max(np.abs(self._physical(u2_hat))))
        )

    def max_speed(self, state: SimulationState) -> float:
        t = state.t
        co = self.coefficients_at(t)
        psi = self.stream_function(state.omega, t, co)
        u1_hat = -self._times_v(self._tilt(psi, t), co.B)
        return self._speed(u1_hat, self._dz(psi), self.grid.coeffs_to_v(state.u1).real)

    def stable_dt(self, state: SimulationState, dt_max: float) -> float:
        """min(dt_max, CFL_SAFETY * cell / max speed) at ``state``."""
        speed = self.max_speed(state)
        if speed <= 0 or not np.isfinite(speed):
            return dt_max
        return min(dt_max, CFL_SAFETY * self.cell / speed)

    # diagnostics

    def record(self, state: SimulationState, dt: float = 0.0) -> DiagnosticsRecord:
        cfg = self.config
        grid = self.grid
        t = state.t
        co = self.coefficients_at(t)
        mask = self.mask
        os = state.omega_star
        F = state.F if state.F is not None else np.zeros_like(os)
        omega = state.omega
        K, E = self.K, self.E
        A = multiplier_grid(self.spec, grid, t)
        M, Mt, _ = M_parts(self.spec, t, K, E)
        zeta = eval_zeta(self.spec, t, K)

        def sq(x, w=1.0):
            return float(np.sum(np.abs((A * w * x)[mask]) ** 2))

        def pair(a, b):
            return float(np.real(np.sum((np.conj(A * a) * (A * b))[mask])))

        psi = self.stream_function(omega, t, co)
        shear = K ** 2 + (E - K * t) ** 2
        ck = {w: np.maximum(ck_weight(self.spec, w, t, K, E), 0.0) for w in ("nu", "I", "E")}
        rec = DiagnosticsRecord(t=t)
        rec.A_omega_star_sq = sq(os)
        rec.A_F_sq = sq(F)
        pneq = K != 0
        rec.zeta_pneq_sq = float(np.sum(np.abs((zeta * os)[mask & pneq]) ** 2))
        U = grid.coeffs_to_v(state.u1).real
        rec.u1_sq = float(2.0 * grid.L_v * np.mean(U ** 2))
        rec.ck_nu, rec.ck_I, rec.ck_E = (sq(os, np.sqrt(ck[w])) for w in ("nu", "I", "E"))
        rec.ck_nu_F, rec.ck_I_F, rec.ck_E_F = (sq(F, np.sqrt(ck[w])) for w in ("nu", "I", "E"))
        rec.dissipation_sq = sq(os, np.sqrt(shear))

        if cfg.budget:
            rec.CKM = float(np.sum((A ** 2 * (-Mt / M) * np.abs(os) ** 2)[mask]))
            rec.Zgrowth = float(np.sum((A ** 2 * dt_log_zeta(self.spec, K) * np.abs(os) ** 2)[mask]))
            lap_tilde = -shear * os
            if not co.flat:
                lap_tilde = lap_tilde + self._times_v(self._tilt(self._tilt(os, t), t), co.B ** 2 - 1.0)
            rec.D = self.nu * pair(os, lap_tilde)
            if cfg.nonlinear:
                rec.NL0a = pair(os, self._transport_zero(os, state.u1))
                rec.NLa = pair(os, self._transport(os, psi, t, co))
                if cfg.split:
                    rec.NL0l = pair(os, self._transport_zero(F, state.u1))
                    rec.NLl = pair(os, self._transport(F, psi, t, co))
            if not (co.flat and co.flat0):
                inv0 = self._inverse_lap0(omega, t, co)
                rec.L1 = pair(os, self._times_v(self._dz(inv0 - psi), co.B0p))
                rec.L2 = pair(os, self._times_v(self._dz(psi), co.B0p - co.Bp))
                if cfg.split:
                    TF = self._tilt(F, t)
                    rec.L3 = self.nu * pair(
                        os, self._times_v(self._tilt(TF, t), co.B0 ** 2 - co.B ** 2) + self._times_v(TF, co.B0p)
                    )
                else:
                    rec.Lfeed = pair(os, self._times_v(self._dz(inv0), co.B0p))

        field_omega = SpectralField(grid, omega)
        rec.hs_norm = field_omega.sobolev_norm(cfg.s)
        boost = np.where(pneq, np.exp(self.spec.delta * self.nu ** (1.0 / 3.0) * np.abs(K) ** (2.0 / 3.0) * t), 0.0)
        rec.ed_norm = SpectralField(grid, boost * omega).sobolev_norm(cfg.s)

        u1_hat = -self._times_v(self._tilt(psi, t), co.B)
        u2_hat = self._dz(psi)
        weight = grid.bracket(2.0 * cfg.s)
        rec.u_pneq_hs_sq = float(grid.area * np.sum(weight * (np.abs(u1_hat) ** 2 + np.abs(u2_hat) ** 2)))
        rec.u1_pneq_l2 = SpectralField(grid, u1_hat).norm()
        rec.u2_l2 = SpectralField(grid, u2_hat).norm()

        dvU = grid.coeffs_to_v(1j * grid.eta * state.u1).real
        omega_zero = grid.coeffs_to_v(omega[0]).real
        rec.consistency_defect = float(np.sqrt(2.0 * grid.L_v * np.mean((-co.B * dvU - omega_zero) ** 2)))
        if cfg.nonlinear:
            forcing = grid.coeffs_to_v(self._u1_forcing(psi, t, co)).real
            rec.u1_forcing_l2 = float(np.sqrt(2.0 * grid.L_v * np.mean(forcing ** 2)))
        if dt > 0:
            rec.cfl = float(dt * self._speed(u1_hat, u2_hat, U) / self.cell)
            if rec.cfl > CFL_SAFETY and not self._cfl_warned:
                logger.warning(f"CFL number {rec.cfl:.3g} at t={t:g} exceeds {CFL_SAFETY:g}")
                self._cfl_warned = True
        return rec


def init_data(config: SimulationConfig) -> Tuple[SpectralField, np.ndarray]:
    """Initial vorticity and zero-mode velocity with ||Omega||_{H^s} + ||U1||_{L2} = epsilon_amp nu^{1/3}."""
    grid = config.grid
    B0 = config.profile.initial.B if config.background else np.ones(grid.n_v)
    if config.initial_field is not None:
        coeffs = config.initial_field.coeffs.copy()
        if config.initial_u1 is not None:
            return SpectralField(grid, coeffs), np.asarray(config.initial_u1, dtype=complex)
        zero_row = grid.coeffs_to_v(coeffs[0])
        U = solve_zero_mode(grid, B0, zero_row.real).values
        return SpectralField(grid, coeffs), grid.v_to_coeffs(U)
    if config.epsilon_amp == 0:
        return SpectralField.zeros(grid), np.zeros(grid.n_v, dtype=complex)

    rng = np.random.default_rng(config.seed)
    decay = -(config.s + SHAPE_DECAY)
    coeffs = np.fft.fft2(rng.standard_normal(grid.shape)) / (grid.n_z * grid.n_v)
    coeffs *= grid.bracket(decay)
    coeffs[grid.k == 0, :] = 0.0
    coeffs = np.where(grid.dealias_mask, coeffs, 0.0)

    zero_mask = grid.dealias_mask[0]
    u1 = np.fft.fft(rng.standard_normal(grid.n_v)) / grid.n_v
    u1 *= (1.0 + grid.eta ** 2) ** (decay / 2.0)
    u1[0] = 0.0
    u1 = np.where(zero_mask, u1, 0.0)
    dvU = grid.coeffs_to_v(1j * grid.eta * u1).real
    coeffs[0] = np.where(zero_mask, grid.v_to_coeffs(-B0 * dvU), 0.0)

    U = grid.coeffs_to_v(u1).real
    size = SpectralField(grid, coeffs).sobolev_norm(config.s) + np.sqrt(2.0 * grid.L_v * np.mean(U ** 2))
    scale = config.epsilon_amp * config.nu ** (1.0 / 3.0) / size
    logger.debug(f"Initial data scaled by {scale:.3e} to reach {config.epsilon_amp:g} nu^(1/3)")
    return SpectralField(grid, scale * coeffs), scale * u1


@dataclass
class RunResult:
    config: SimulationConfig
    records: List[DiagnosticsRecord]
    verdict: Verdict
    details: Dict[str, float]
    final_state: SimulationState
    snapshots: List[Tuple[float, SpectralField]] = field(default_factory=list)
    blowup: Optional[DiagnosticsRecord] = None

    def write_diagnostics(self, path) -> Path:
        return write_csv(path, DIAGNOSTICS_HEADER, [r.to_row() for r in self.records])

    def write_snapshots(self, directory) -> List[Path]:
        directory = Path(directory)
        return [write_field(directory / f"omega_t{t:010.4f}.bin", f) for t, f in self.snapshots]


def bootstrap_series(records: List[DiagnosticsRecord], nu: float) -> np.ndarray:
    """||A Omega*||^2 + int (CK_nu + CK_I + CK_E + nu ||A sqrt(-Delta_L) Omega*||^2) along records."""
    times = np.array([r.t for r in records])
    rate = np.array([r.ck_nu + r.ck_I + r.ck_E + nu * r.dissipation_sq for r in records])
    running = integrate.cumulative_trapezoid(rate, times, initial=0.0) if times.size > 1 else np.zeros(1)
    return np.array([r.A_omega_star_sq for r in records]) + running


def evaluate_verdict(
    records: List[DiagnosticsRecord], config: SimulationConfig, blowup: bool = False
) -> Tuple[Verdict, Dict[str, float]]:
    """Bootstrap thresholds checked on the records with t <= c_star / nu."""
    if blowup:
        return Verdict.BLOWUP, {}
    th = config.thresholds
    q = bootstrap_series(records, config.nu)
    horizon = th.c_star / config.nu
    details = {"q_max": 0.0, "u1_max": 0.0, "low_reg_max": 0.0, "horizon": horizon}
    if config.epsilon_amp == 0 or q[0] == 0:
        return Verdict.STABLE, details
    target = config.epsilon_amp ** 2 * config.nu ** (2.0 / 3.0)
    t_switch = config.multiplier.t_switch
    verdict = Verdict.STABLE
    base_low = records[0].zeta_pneq_sq
    for r, qi in zip(records, q):
        if r.t > horizon:
            logger.info(f"Records after t={horizon:.4g} (c_star / nu) are outside the bootstrap window")
            break
        ratio = qi / q[0]
        limit = th.short if r.t <= t_switch else 2.0 * th.C1
        u1_ratio = r.u1_sq / target
        low = r.zeta_pneq_sq / base_low if base_low > 0 else 0.0
        details["q_max"] = max(details["q_max"], float(ratio))
        details["u1_max"] = max(details["u1_max"], float(u1_ratio))
        details["low_reg_max"] = max(details["low_reg_max"], float(low))
        if ratio > limit or u1_ratio > th.u1 or low > th.low_regularity:
            verdict = Verdict.THRESHOLD_EXCEEDED
    return verdict, details


def run(
    config: SimulationConfig,
    progress: Optional[Callable[[float], None]] = None,
    resume: Optional[SimulationState] = None,
) -> RunResult:
    """Integrate to ``config.t_end``, from fresh initial data or from a checkpointed state."""
    sim = Simulator(config)
    state = sim.initial_state() if resume is None else resume
    sim.check_tilt(state)
    remaining = config.t_end - state.t
    if remaining <= 0:
        raise InvalidInputError(f"checkpoint time {state.t:g} is past t_end={config.t_end:g}")
    dt_max = sim.stable_dt(state, config.dt)
    if dt_max < config.dt:
        logger.warning(f"dt lowered from {config.dt:g} to {dt_max:.3g} by the CFL bound at t={state.t:g}")
    n_steps = int(np.ceil(remaining / dt_max - 1e-9))
    dt = remaining / n_steps
    every = max(1, n_steps // max(config.n_samples, 1))
    grid = config.grid
    records = [sim.record(state, dt)]
    snapshots = [(state.t, SpectralField(grid, state.omega.copy()))] if config.keep_snapshots else []
    start_norm = float(np.linalg.norm(state.omega)) or 1.0
    blowup = None
    logger.info(
        f"Simulating {config.profile.name} on {grid.shape}, nu={config.nu:g}, eps={config.epsilon_amp:g}, "
        f"{n_steps} steps of {dt:.3g} ({config.split_mode.value})"
    )
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            new = sim.step(state, dt)
            ratio = float(np.linalg.norm(new.omega)) / start_norm if new.is_finite() else np.inf
            if not np.isfinite(ratio) or ratio > config.blowup_ratio:
                blowup = records[-1]
                logger.warning(f"Blow-up at t={new.t:g} (norm ratio {ratio:.3g}); last valid t={state.t:g}")
                break
            state = new
            if i % every == 0 or i == n_steps:
                records.append(sim.record(state, dt))
                if config.keep_snapshots:
                    snapshots.append((state.t, SpectralField(grid, state.omega.copy())))
            if progress is not None:
                progress(state.t)
    _integrate_running(records)
    verdict, details = evaluate_verdict(records, config, blowup is not None)
    logger.info(f"Run finished at t={state.t:g}: {verdict.value}")
    return RunResult(config, records, verdict, details, state, snapshots, blowup)


def _integrate_running(records: List[DiagnosticsRecord]):
    times = np.array([r.t for r in records])
    if times.size < 2:
        return
    velocity = integrate.cumulative_trapezoid([r.u_pneq_hs_sq for r in records], times, initial=0.0)
    forcing = integrate.cumulative_trapezoid([r.u1_forcing_l2 for r in records], times, initial=0.0)
    for r, a, b in zip(records, velocity, forcing):
        r.u_pneq_integral = float(a)
        r.u1_forcing_integral = float(b)


def energy_closure(records: List[DiagnosticsRecord], skip: int = 2) -> float:
    """Max |centered d/dt (1/2 ||A Omega*||^2) - budget| over interior records."""
    times = np.array([r.t for r in records])
    energy = np.array([r.half_energy for r in records])
    budget = np.array([r.budget_sum for r in records])
    if times.size < skip + 3:
        raise InvalidInputError("too few records for a centered difference")
    idx = np.arange(max(skip, 1), times.size - 1)
    derivative = (energy[idx + 1] - energy[idx - 1]) / (times[idx + 1] - times[idx - 1])
    return float(np.max(np.abs(derivative - budget[idx])))


def write_checkpoint(state: SimulationState, grid: Grid, directory) -> Path:
    """Store the state as SpectralField files plus the zero-mode velocity and clock."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field(directory / "omega_star.bin", SpectralField(grid, state.omega_star))
    if state.F is not None:
        write_field(directory / "F.bin", SpectralField(grid, state.F))
    np.save(directory / "u1.npy", state.u1)
    with open(directory / "state.json", "w", encoding="utf-8") as fh:
        json.dump({"t": state.t, "n_steps": state.n_steps, "split": state.F is not None}, fh, indent=2)
    logger.info(f"Checkpoint at t={state.t:g} written to {directory}")
    return directory


def read_checkpoint(directory, dealias_fraction: float = 2.0 / 3.0) -> Tuple[SimulationState, Grid]:
    directory = Path(directory)
    try:
        with open(directory / "state.json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidInputError(f"{directory}: unreadable checkpoint ({e})") from e
    omega_star = read_field(directory / "omega_star.bin", dealias_fraction)
    F = read_field(directory / "F.bin", dealias_fraction).coeffs if meta.get("split") else None
    u1 = np.load(directory / "u1.npy")
    state = SimulationState(float(meta["t"]), omega_star.coeffs, u1, F, int(meta.get("n_steps", 0)))
    return state, omega_star.grid
