"""Linear profile F driven by the auxiliary vorticity Omega*.

Per nonzero mode k the moving-frame equation is

    dF/dt = nu Delta_0 F + i k B0' Delta_0^{-1} (F + Omega*),   F(0) = 0.

The default scheme integrates nu Delta_L exactly through its Fourier factor
and treats nu (Delta_0 - Delta_L) and the nonlocal term with Adams-Bashforth-2.
The representation formula and the shifted resolvent problem are evaluated
independently of the time stepper for cross-checking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, linalg

from shearlab.core.elliptic import operator_matrix
from shearlab.core.errors import InvalidInputError, ResolutionError
from shearlab.core.grid import Grid, SpectralField
from shearlab.core.multipliers import MultiplierSpec, ck_weight, eval_M_and_A
from shearlab.core.oracles import dissipation_exponent
from shearlab.core.profile import ShearProfile, support_radius

logger = logging.getLogger(__name__)

DELTA_LIN = 1.0 / 128.0
MAX_REPRESENTATION_NODES = 32

Forcing = Callable[[float], np.ndarray]


class LinearScheme(Enum):
    IFAB2 = "ifab2"
    CNAB2 = "cnab2"


@dataclass
class LinearProfileState:
    k: int
    t: float
    F: np.ndarray
    delta_lin: float = DELTA_LIN
    n_steps: int = 0
    previous: Optional[np.ndarray] = field(default=None, repr=False)
    previous_t: Optional[float] = None


def pulse_forcing(
    grid: Grid, duration: float = 1.0, width: float = 1.0, center: float = 0.0, amplitude: float = 1.0
) -> Forcing:
    """sin^2(pi t / duration) times a Gaussian in v, switched off after ``duration``."""
    shape = amplitude * np.exp(-((grid.v - center) ** 2) / (2.0 * width ** 2)).astype(complex)

    def forcing(t: float) -> np.ndarray:
        if t < 0 or t > duration:
            return np.zeros(grid.n_v, dtype=complex)
        return np.sin(np.pi * t / duration) ** 2 * shape

    return forcing


def _zero_forcing(n: int) -> Forcing:
    zeros = np.zeros(n, dtype=complex)
    return lambda t: zeros


class LinearProfileSolver:
    """Time stepper for one mode F_k."""

    def __init__(
        self,
        profile: ShearProfile,
        k: int,
        dt: float,
        scheme="ifab2",
        omega_star: Optional[Forcing] = None,
        extra_source: Optional[Forcing] = None,
        delta_lin: float = DELTA_LIN,
    ):
        if k == 0:
            raise InvalidInputError("the linear profile carries nonzero modes only")
        if not dt > 0:
            raise InvalidInputError(f"dt must be positive, got {dt}")
        self.profile = profile.initial
        self.grid = profile.grid
        self.nu = profile.nu
        self.k = int(k)
        self.dt = float(dt)
        self.scheme = LinearScheme(scheme)
        self.delta_lin = delta_lin
        B0, B0p = self.profile.coefficient_B()
        self.B0sq = B0 ** 2
        self.B0p = B0p
        self.flat = not np.any(B0p) and np.allclose(B0, 1.0)
        self.omega_star = omega_star or _zero_forcing(self.grid.n_v)
        self.extra_source = extra_source
        self._lu: Dict[float, tuple] = {}

    def lap0(self, t: float) -> np.ndarray:
        return operator_matrix(self.grid, self.k, t, self.B0sq, self.B0p)

    def _lap0_lu(self, t: float):
        lu = self._lu.get(t)
        if lu is None:
            if len(self._lu) > 4:
                self._lu.pop(next(iter(self._lu)))
            lu = linalg.lu_factor(self.lap0(t))
            self._lu[t] = lu
        return lu

    def _tilt(self, t: float, values: np.ndarray) -> np.ndarray:
        g = self.grid
        return g.coeffs_to_v(1j * (g.eta - self.k * t) * g.v_to_coeffs(values))

    def nonlocal_term(self, t: float, F: np.ndarray) -> np.ndarray:
        """i k B0' Delta_0^{-1} (F + Omega*)."""
        if not np.any(self.B0p):
            return np.zeros(self.grid.n_v, dtype=complex)
        return 1j * self.k * self.B0p * linalg.lu_solve(self._lap0_lu(t), F + self.omega_star(t))

    def explicit(self, t: float, F: np.ndarray) -> np.ndarray:
        """Everything except nu Delta_L for the integrating-factor scheme."""
        N = self.nonlocal_term(t, F)
        if not self.flat:
            TF = self._tilt(t, F)
            N = N + self.nu * ((self.B0sq - 1.0) * self._tilt(t, TF) + self.B0p * TF)
        if self.extra_source is not None:
            N = N + self.extra_source(t)
        return N

    def _factor(self, t0: float, t1: float) -> np.ndarray:
        eta = self.grid.eta
        return np.exp(-(dissipation_exponent(self.nu, t1, self.k, eta) - dissipation_exponent(self.nu, t0, self.k, eta)))

    def _apply_factor(self, r: np.ndarray, values: np.ndarray) -> np.ndarray:
        return self.grid.coeffs_to_v(r * self.grid.v_to_coeffs(values))

    def start(self) -> LinearProfileState:
        return LinearProfileState(self.k, 0.0, np.zeros(self.grid.n_v, dtype=complex), self.delta_lin)

    def step(self, state: LinearProfileState) -> LinearProfileState:
        if self.scheme is LinearScheme.IFAB2:
            return self._step_ifab2(state)
        return self._step_cnab2(state)

    def _step_ifab2(self, state: LinearProfileState) -> LinearProfileState:
        t0, dt = state.t, self.dt
        t1 = t0 + dt
        r1 = self._factor(t0, t1)
        N0 = self.explicit(t0, state.F)
        if state.previous is None:
            predictor = self._apply_factor(r1, state.F + dt * N0)
            F1 = self._apply_factor(r1, state.F + 0.5 * dt * N0) + 0.5 * dt * self.explicit(t1, predictor)
        else:
            r0 = self._factor(state.previous_t, t0)
            lagged = self._apply_factor(r0, state.previous)
            F1 = self._apply_factor(r1, state.F + dt * (1.5 * N0 - 0.5 * lagged))
        return LinearProfileState(self.k, t1, F1, state.delta_lin, state.n_steps + 1, N0, t0)

    def _step_cnab2(self, state: LinearProfileState) -> LinearProfileState:
        t0, dt = state.t, self.dt
        t1 = t0 + dt
        eye = np.eye(self.grid.n_v)
        E0 = self.nonlocal_term(t0, state.F)
        if self.extra_source is not None:
            E0 = E0 + self.extra_source(t0)
        A1 = self.nu * self.lap0(t1)
        if state.previous is None:
            F1 = linalg.solve(eye - dt * A1, state.F + dt * E0)
        else:
            A0 = self.nu * self.lap0(t0)
            rhs = state.F + 0.5 * dt * (A0 @ state.F) + dt * (1.5 * E0 - 0.5 * state.previous)
            F1 = linalg.solve(eye - 0.5 * dt * A1, rhs)
        return LinearProfileState(self.k, t1, F1, state.delta_lin, state.n_steps + 1, E0, t0)

    def run(self, t_end: float, n_samples: int = 0) -> "LinearRun":
        """Advance to ``t_end`` in steps of dt (the last step is shortened to land on t_end)."""
        n_steps = int(np.ceil(t_end / self.dt - 1e-9))
        if n_steps <= 0:
            raise InvalidInputError(f"t_end must exceed zero, got {t_end}")
        dt_nominal = self.dt
        self.dt = t_end / n_steps
        every = max(1, n_steps // n_samples) if n_samples else n_steps
        state = self.start()
        times, values = [0.0], [state.F.copy()]
        try:
            for i in range(1, n_steps + 1):
                state = self.step(state)
                if i % every == 0 or i == n_steps:
                    times.append(state.t)
                    values.append(state.F.copy())
        finally:
            self.dt = dt_nominal
        return LinearRun(self.k, np.array(times), np.array(values), state)


@dataclass
class LinearRun:
    k: int
    times: np.ndarray
    values: np.ndarray
    final: LinearProfileState

    @property
    def F(self) -> np.ndarray:
        return self.final.F


def to_field(grid: Grid, modes: Dict[int, np.ndarray]) -> SpectralField:
    """Assemble per-k v samples (k > 0) into a real field using F_{-k} = conj(F_k)."""
    coeffs = np.zeros(grid.shape, dtype=complex)
    for k, values in modes.items():
        if k <= 0:
            raise InvalidInputError(f"pass positive k only, got {k}")
        coeffs[k % grid.n_z] = grid.v_to_coeffs(values)
        coeffs[-k % grid.n_z] = grid.v_to_coeffs(np.conj(values))
    return SpectralField(grid, coeffs)


def duhamel_couette(nu: float, grid: Grid, k: int, source_hat: np.ndarray, t: float, n_nodes: int = 32) -> np.ndarray:
    """int_0^t exp(-(E(t) - E(tau))) S_hat dtau for a constant source, by Gauss-Legendre in tau."""
    nodes, weights = leggauss(n_nodes)
    tau = 0.5 * t * (nodes + 1.0)
    E_t = dissipation_exponent(nu, t, k, grid.eta)
    total = np.zeros(grid.n_v, dtype=complex)
    for tj, wj in zip(tau, weights):
        total += 0.5 * t * wj * np.exp(-(E_t - dissipation_exponent(nu, tj, k, grid.eta)))
    return total * source_hat


@dataclass
class CrosscheckReport:
    k: int
    t: float
    n_nodes: int
    discrepancy: float
    mu: float
    min_real_eigenvalue: float

    @property
    def contour_ok(self) -> bool:
        return self.min_real_eigenvalue >= self.mu


def original_frame_operator(profile: ShearProfile, k: int) -> np.ndarray:
    """L = i k v - i k B0' Delta_B0^{-1} - nu Delta_B0, so that df/dt = -L f + S."""
    p0 = profile.initial
    grid = profile.grid
    B0, B0p = p0.coefficient_B()
    lap_b0 = operator_matrix(grid, k, 0.0, B0 ** 2, B0p)
    inverse = linalg.solve(lap_b0, np.eye(grid.n_v))
    return 1j * k * np.diag(grid.v) - 1j * k * B0p[:, None] * inverse - profile.nu * lap_b0


def representation_crosscheck(
    profile: ShearProfile,
    k: int,
    omega_star: Forcing,
    t: float,
    n_nodes: int = MAX_REPRESENTATION_NODES,
    dt: Optional[float] = None,
    delta_lin: float = DELTA_LIN,
) -> CrosscheckReport:
    """Relative gap between the time-stepped F_k(t) and the Duhamel representation in the original frame."""
    if not 1 <= n_nodes <= MAX_REPRESENTATION_NODES:
        raise InvalidInputError(f"n_nodes must lie in [1, {MAX_REPRESENTATION_NODES}], got {n_nodes}")
    grid = profile.grid
    p0 = profile.initial
    stepped = LinearProfileSolver(profile, k, dt or t / 2000.0, omega_star=omega_star, delta_lin=delta_lin).run(t).F

    B0, B0p = p0.coefficient_B()
    L = original_frame_operator(profile, k)
    mu = delta_lin * profile.nu ** (1.0 / 3.0) * abs(k) ** (2.0 / 3.0) + profile.nu * k ** 2
    shifted = L - mu * np.eye(grid.n_v)
    nodes, weights = leggauss(n_nodes)
    f = np.zeros(grid.n_v, dtype=complex)
    for xj, wj in zip(nodes, weights):
        tau = 0.5 * t * (xj + 1.0)
        lap0 = operator_matrix(grid, k, tau, B0 ** 2, B0p)
        X = 1j * k * linalg.solve(lap0, omega_star(tau))
        S = np.exp(-1j * k * tau * grid.v) * B0p * X
        s = t - tau
        f += 0.5 * t * wj * np.exp(-mu * s) * (linalg.expm(-s * shifted) @ S)
    represented = np.exp(1j * k * t * grid.v) * f

    min_real = float(np.min(linalg.eigvals(L).real))
    if min_real < mu:
        logger.warning(f"k={k}: min Re spec(L) = {min_real:.3e} below the decay rate {mu:.3e}")
    scale = np.linalg.norm(stepped)
    gap = np.linalg.norm(represented - stepped)
    discrepancy = float(gap / scale) if scale > 0 else float(gap)
    return CrosscheckReport(k, t, n_nodes, discrepancy, mu, min_real)


@dataclass
class ResolventReport:
    k: int
    tau: float
    epsilon: float
    shifts: np.ndarray
    upsilon: List[np.ndarray]
    theta: List[np.ndarray]
    envelopes: np.ndarray
    dominance: np.ndarray
    forcing_norm: float

    @property
    def constant(self) -> float:
        """max_w sup_xi |Upsilon_hat| over the weighted forcing norm."""
        if self.forcing_norm == 0:
            return 0.0
        return float(np.max(self.envelopes) / self.forcing_norm)


def default_shifts(profile: ShearProfile, n: int = 16) -> np.ndarray:
    """w values spanning the v-image of the b'' support."""
    p0 = profile.initial
    radius = max(support_radius(p0), profile.grid.h)
    lo, hi = p0.b(np.array([-radius, radius]))
    return np.linspace(lo, hi, n)


def resolvent_solve(
    profile: ShearProfile,
    k: int,
    tau: float,
    omega_star_tau: Optional[np.ndarray] = None,
    shifts: Optional[Sequence[float]] = None,
    epsilon: Optional[float] = None,
    delta_lin: float = DELTA_LIN,
    rhs_override: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
    s: float = 2.0,
) -> ResolventReport:
    """Solve the shifted resolvent system for (Upsilon, Theta) at each probe shift w."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    grid = profile.grid
    p0 = profile.initial
    eps = epsilon if epsilon is not None else profile.nu / k
    if not eps > 0:
        raise InvalidInputError(f"epsilon must be positive, got {eps}")
    w_values = np.asarray(shifts if shifts is not None else default_shifts(profile), dtype=float)
    v = grid.v
    n = grid.n_v
    D = grid.derivative_matrix
    D2 = D @ D
    eye = np.eye(n)

    if omega_star_tau is None:
        omega_star_tau = np.zeros(n, dtype=complex)
    B0, B0p = p0.coefficient_B()
    X = 1j * k * linalg.solve(operator_matrix(grid, k, tau, B0 ** 2, B0p), omega_star_tau)
    X_hat = grid.v_to_coeffs(X)
    weight = (1.0 + k ** 2 + grid.eta ** 2) ** (s / 2.0) * np.sqrt(1.0 + k ** 2 + (grid.eta - k * tau) ** 2)
    forcing_norm = float(np.linalg.norm(weight * grid.h * np.fft.fft(X)))
    if rhs_override is not None:
        forcing_norm = 1.0

    upsilons, thetas, envelopes, dominance = [], [], [], []
    for w in w_values:
        Bw = p0.B_at(v + w)
        Bpw = p0.Bprime_at(v + w)
        if rhs_override is not None:
            rhs = np.asarray(rhs_override(v, w), dtype=complex)
        else:
            X_shift = grid.coeffs_to_v(X_hat * np.exp(1j * grid.eta * w))
            rhs = np.exp(-1j * k * tau * v) * Bpw * X_shift
        top_left = eps * (Bw[:, None] ** 2 * D2 + Bpw[:, None] * D) + delta_lin * eps ** (1.0 / 3.0) * eye - 1j * np.diag(v)
        system = np.block(
            [
                [top_left, 1j * np.diag(Bpw)],
                [-eye, Bw[:, None] ** 2 * D2 + Bpw[:, None] * D - k ** 2 * eye],
            ]
        )
        try:
            sol = linalg.solve(system, np.concatenate([rhs, np.zeros(n, dtype=complex)]))
        except linalg.LinAlgError as e:
            raise ResolutionError(f"resolvent system singular at w={w:g}: {e}") from e
        if not np.all(np.isfinite(sol)):
            raise ResolutionError(f"resolvent solution non-finite at w={w:g}")
        upsilon, theta = sol[:n], sol[n:]
        upsilons.append(upsilon)
        thetas.append(theta)
        envelopes.append(float(np.max(np.abs(grid.h * np.fft.fft(upsilon)))))
        diag = np.abs(np.diag(top_left))
        off = np.sum(np.abs(top_left), axis=1) - diag
        dominance.append(float(np.min(diag / np.where(off > 0, off, np.inf))))
    return ResolventReport(
        k, tau, eps, w_values, upsilons, thetas, np.array(envelopes), np.array(dominance), forcing_norm
    )


@dataclass
class LinCKConstants:
    k: int
    forcing_norm: float
    C3: float
    C34: float
    C35: float
    C_WI: float

    def to_dict(self) -> Dict[str, float]:
        return {"k": self.k, "R": self.forcing_norm, "C3": self.C3, "C34": self.C34, "C35": self.C35, "C_WI": self.C_WI}


def linear_ck_constants(
    profile: ShearProfile,
    k: int,
    spec: MultiplierSpec,
    omega_star: Forcing,
    t_end: float,
    dt: float,
    n_samples: int = 200,
) -> LinCKConstants:
    """Ratios of F norms to the forcing norms ||A (-Delta_L)^{-1/2} Omega*|| and ||A sqrt(CK_I) Omega*||."""
    grid = profile.grid
    run = LinearProfileSolver(profile, k, dt, omega_star=omega_star).run(t_end, n_samples)
    eta = grid.eta
    sup_AF = sup_grad = sup_kAF = sup_kAF_t = 0.0
    low, ck_F, forcing_low, forcing_ck = [], [], [], []
    for t, F in zip(run.times, run.values):
        A = eval_M_and_A(spec, t, k, eta)[2]
        grad = np.sqrt(k ** 2 + (eta - k * t) ** 2)
        ck = np.sqrt(np.maximum(ck_weight(spec, "I", t, k, eta), 0.0))
        F_hat = grid.v_to_coeffs(F)
        O_hat = grid.v_to_coeffs(omega_star(t))
        bracket_t = np.sqrt(1.0 + t ** 2)
        sup_AF = max(sup_AF, float(np.linalg.norm(A * F_hat)))
        sup_grad = max(sup_grad, float(np.linalg.norm(A * grad * F_hat)) / bracket_t)
        sup_kAF = max(sup_kAF, float(np.linalg.norm(k * A * F_hat)))
        sup_kAF_t = max(sup_kAF_t, float(np.linalg.norm(k * A * F_hat)) / bracket_t)
        low.append(np.sum(np.abs(k * A * F_hat / grad) ** 2))
        ck_F.append(np.sum(np.abs(k * A * ck * F_hat) ** 2))
        forcing_low.append(np.sum(np.abs(A * O_hat / grad) ** 2))
        forcing_ck.append(np.sum(np.abs(A * ck * O_hat) ** 2))
    times = run.times
    R = float(np.sqrt(integrate.trapezoid(forcing_low, times)))
    R_ck = float(np.sqrt(integrate.trapezoid(forcing_ck, times)))
    if R == 0 or R_ck == 0:
        raise InvalidInputError("forcing vanishes on the sampled window")
    return LinCKConstants(
        k,
        R,
        sup_AF / R,
        sup_grad / R,
        float(np.sqrt(integrate.trapezoid(low, times))) / R,
        (sup_kAF + sup_kAF_t + float(np.sqrt(integrate.trapezoid(ck_F, times)))) / R_ck,
    )
