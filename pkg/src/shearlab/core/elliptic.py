"""Per-mode elliptic operators in the moving frame and their inverses.

For a fixed z wavenumber k every operator acts on the v samples as
B2 * T^2 + B1 * T - k^2 with T = d_v - i k t (the tilted derivative):

    lap_l      Delta_L         B2 = 1,      B1 = 0
    lap_t      Delta_t         B2 = B(t)^2, B1 = B'(t)
    lap_tilde  Delta_t~        B2 = B(t)^2, B1 = 0
    lap_0      Delta_0         B2 = B0^2,   B1 = B0'
    lap_b0     Delta_B0        B2 = B0^2,   B1 = B0', untilted
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg

from shearlab.core.errors import InvalidInputError, NeumannDivergenceError
from shearlab.core.grid import Grid, spectral_matrix
from shearlab.core.profile import ShearProfile, probe_set, v_support_radius

logger = logging.getLogger(__name__)

NEUMANN_TOL = 1e-13
NEUMANN_MAX_TERMS = 64
GREEN_WINDOW = 16.0


class EllipticKind(Enum):
    LAP_L = "lap_l"
    LAP_T = "lap_t"
    LAP_TILDE = "lap_tilde"
    LAP_0 = "lap_0"
    LAP_B0 = "lap_b0"


def tilted_derivative(grid: Grid, k: float, t: float) -> np.ndarray:
    return grid.derivative_matrix - 1j * k * t * np.eye(grid.n_v)


def operator_matrix(grid: Grid, k: float, t: float, B2: np.ndarray, B1: Optional[np.ndarray]) -> np.ndarray:
    """Dense matrix of B2 T^2 + B1 T - k^2 on the v samples."""
    T = tilted_derivative(grid, k, t)
    M = B2[:, None] * (T @ T)
    if B1 is not None:
        M = M + B1[:, None] * T
    return M - k ** 2 * np.eye(grid.n_v)


@dataclass(frozen=True)
class EllipticOperatorSpec:
    kind: EllipticKind
    profile: ShearProfile
    t: float
    k: int

    def __post_init__(self):
        if not isinstance(self.kind, EllipticKind):
            object.__setattr__(self, "kind", EllipticKind(self.kind))

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    @property
    def coefficient_profile(self) -> ShearProfile:
        if self.kind in (EllipticKind.LAP_T, EllipticKind.LAP_TILDE):
            return self.profile.at(self.t)
        return self.profile.initial

    def coefficients(self):
        """(B2, B1) of the operator; B1 is None when there is no first-order term."""
        if self.kind is EllipticKind.LAP_L:
            return np.ones(self.grid.n_v), None
        p = self.coefficient_profile
        B, Bp = p.coefficient_B()
        if self.kind is EllipticKind.LAP_TILDE:
            return B ** 2, None
        return B ** 2, Bp

    @cached_property
    def matrix(self) -> np.ndarray:
        B2, B1 = self.coefficients()
        t = 0.0 if self.kind is EllipticKind.LAP_B0 else self.t
        return operator_matrix(self.grid, self.k, t, B2, B1)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values


@dataclass
class EllipticSolution:
    values: np.ndarray
    residual: float
    method: str
    gamma: Optional[float] = None
    n_terms: Optional[int] = None
    term_norms: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "method": self.method,
            "residual": self.residual,
            "gamma": self.gamma,
            "n_terms": self.n_terms,
        }


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else float(np.linalg.norm(a))


def solve_zero_mode(grid: Grid, B: np.ndarray, rhs: np.ndarray) -> EllipticSolution:
    """Zero-mean U with -B dU/dv = rhs, after removing the unsolvable mean of rhs/B."""
    q = -np.asarray(rhs) / B
    q = q - np.mean(q)
    coeffs = grid.v_to_coeffs(q)
    nonzero = grid.eta != 0
    U_hat = np.zeros_like(coeffs)
    U_hat[nonzero] = coeffs[nonzero] / (1j * grid.eta[nonzero])
    U = grid.coeffs_to_v(U_hat)
    if np.isrealobj(rhs):
        U = U.real
    applied = -B * grid.coeffs_to_v(1j * grid.eta * grid.v_to_coeffs(U))
    target = -B * q
    return EllipticSolution(U, _relative(applied, target), "zero_mode")


def solve(spec: EllipticOperatorSpec, rhs: np.ndarray, method: str = "direct") -> EllipticSolution:
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (spec.grid.n_v,):
        raise InvalidInputError(f"rhs must have shape ({spec.grid.n_v},), got {rhs.shape}")
    if spec.k == 0:
        B = spec.coefficient_profile.B if spec.kind is not EllipticKind.LAP_L else np.ones(spec.grid.n_v)
        return solve_zero_mode(spec.grid, B, rhs)
    if method == "direct":
        x = linalg.solve(spec.matrix, rhs)
        return EllipticSolution(x, _relative(spec.apply(x), rhs), "direct")
    if method == "neumann":
        if spec.kind is not EllipticKind.LAP_T:
            raise InvalidInputError("the Neumann path inverts Delta_t through Delta_0")
        return neumann_solve(spec.profile, spec.k, spec.t, rhs)
    raise InvalidInputError(f"unknown method {method!r}")


def weight_matrix(grid: Grid, k: float, s: float) -> np.ndarray:
    return spectral_matrix((1.0 + k ** 2 + grid.eta ** 2) ** (s / 2.0))


def neumann_operator(profile: ShearProfile, k: int, t: float):
    """(R, Delta_0) with Delta_t = (I - R) Delta_0."""
    grid = profile.grid
    B, Bp = profile.at(t).coefficient_B()
    B0, B0p = profile.initial.coefficient_B()
    T = tilted_derivative(grid, k, t)
    lap0 = operator_matrix(grid, k, t, B0 ** 2, B0p)
    P = (B0 ** 2 - B ** 2)[:, None] * (T @ T) + (B0p - Bp)[:, None] * T
    R = linalg.solve(lap0.T, P.T).T
    return R, lap0


def contraction_ratio(profile: ShearProfile, k: int, t: float, s: float = 2.0) -> float:
    """gamma = ||W R W^{-1}||_2 with W the <k, eta>^s multiplier."""
    R, _ = neumann_operator(profile, k, t)
    W = weight_matrix(profile.grid, k, s)
    W_inv = weight_matrix(profile.grid, k, -s)
    return float(np.linalg.norm(W @ R @ W_inv, 2))


def neumann_solve(profile: ShearProfile, k: int, t: float, rhs: np.ndarray, s: float = 2.0) -> EllipticSolution:
    """Delta_t^{-1} rhs = Delta_0^{-1} sum_n R^n rhs."""
    R, lap0 = neumann_operator(profile, k, t)
    W = weight_matrix(profile.grid, k, s)
    gamma = float(np.linalg.norm(W @ R @ weight_matrix(profile.grid, k, -s), 2))
    if gamma >= 1:
        raise NeumannDivergenceError(gamma, f"Neumann series diverges at k={k}, t={t:g}: gamma={gamma:.4f}")
    term = np.asarray(rhs, dtype=complex)
    total = term.copy()
    norms = [float(np.linalg.norm(W @ term))]
    floor = NEUMANN_TOL * np.linalg.norm(rhs)
    n = 1
    while n < NEUMANN_MAX_TERMS and np.linalg.norm(term) > floor:
        term = R @ term
        total += term
        norms.append(float(np.linalg.norm(W @ term)))
        n += 1
    x = linalg.solve(lap0, total)
    lap_t = EllipticOperatorSpec(EllipticKind.LAP_T, profile, t, k)
    residual = _relative(lap_t.apply(x), rhs)
    logger.debug(f"Neumann k={k} t={t:g}: gamma={gamma:.3e}, {n} terms, residual {residual:.2e}")
    return EllipticSolution(x, residual, "neumann", gamma, n, norms)


def smooth_cutoff(v: np.ndarray, radius: float, width: float = 1.0) -> np.ndarray:
    """C-infinity function equal to 1 on |v| <= radius and 0 beyond radius + width."""
    u = np.clip((np.abs(v) - radius) / width, 0.0, 1.0)
    out = np.ones_like(u)
    inner = (u > 0) & (u < 1)
    a = np.exp(-1.0 / u[inner])
    b = np.exp(-1.0 / (1.0 - u[inner]))
    out[inner] = b / (a + b)
    out[u >= 1] = 0.0
    return out


@dataclass
class GreensKernel:
    """G_k(v, w) = exp(-|k| |y(v) - y(w)|) / |k| with y = b0^{-1}, split as chi(w) G1(v - w) + G2."""

    k: int
    grid: Grid
    y: np.ndarray
    B0: np.ndarray
    chi: np.ndarray
    G: np.ndarray
    G1: np.ndarray
    G2: np.ndarray

    def apply_inverse(self, X: np.ndarray) -> np.ndarray:
        """Delta_B0^{-1} X by quadrature against G with the diagonal kink corrected."""
        h = self.grid.h
        return -0.5 * (h * self.G @ (X / self.B0) - h ** 2 * X / (6.0 * self.B0 ** 2))

    def g1_constant(self) -> float:
        """max |G1_hat(xi)| (k^2 + xi^2) from the sampled difference kernel."""
        d = self.grid.v - self.grid.v[0] - self.grid.L_v
        g1 = np.exp(-abs(self.k) * np.abs(d)) / abs(self.k)
        spectrum = np.abs(self.grid.h * np.fft.fft(g1))
        return float(np.max(spectrum * (self.k ** 2 + self.grid.eta ** 2)))

    def g2_constant(self, s: float = 2.0) -> float:
        """max |G2_hat(xi, eta)| (k^2 + xi^2) <xi + eta>^{ceil(s)+2} on a resolution-independent window."""
        spectrum = np.abs(self.grid.h ** 2 * np.fft.fft2(self.G2))
        xi = self.grid.eta
        window = min((2.0 / 3.0) * np.max(np.abs(xi)), GREEN_WINDOW)
        keep = np.abs(xi) <= window
        Xi, Eta = np.meshgrid(xi[keep], xi[keep], indexing="ij")
        weight = (Xi ** 2 + self.k ** 2) * (1.0 + (Xi + Eta) ** 2) ** ((np.ceil(s) + 2) / 2.0)
        return float(np.max(spectrum[np.ix_(keep, keep)] * weight))


def greens_kernel(profile: ShearProfile, k: int) -> GreensKernel:
    if k == 0:
        raise InvalidInputError("Green's kernel is defined for k != 0 only")
    p0 = profile.initial
    grid = profile.grid
    y = p0.y_of_v
    v = grid.v
    G = np.exp(-abs(k) * np.abs(y[:, None] - y[None, :])) / abs(k)
    _, B0p = p0.coefficient_B()
    chi = smooth_cutoff(v, 1.0 + v_support_radius(p0)) if np.any(B0p) else np.ones_like(v)
    G1 = np.exp(-abs(k) * np.abs(v[:, None] - v[None, :])) / abs(k)
    G2 = G - chi[None, :] * G1
    return GreensKernel(k, grid, y, p0.B, chi, G, G1, G2)


def kernel_check(profile: ShearProfile, k: int, X: np.ndarray) -> float:
    """Relative gap between the kernel quadrature and a direct Delta_B0 solve."""
    kernel = greens_kernel(profile, k)
    direct = solve(EllipticOperatorSpec(EllipticKind.LAP_B0, profile, 0.0, k), X).values
    return _relative(kernel.apply_inverse(X), direct)


class ProbeMultiplier(Enum):
    ONE = "one"
    INV_GRAD = "inv_grad"


@dataclass
class ProbeReport:
    k: int
    t: float
    multiplier: ProbeMultiplier
    delta_diff: bool
    ratios: List[float]

    @property
    def worst(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


def elliptic_estimate_probe(
    profile: ShearProfile,
    k: int,
    t: float,
    coeff: Optional[np.ndarray] = None,
    multiplier=ProbeMultiplier.ONE,
    probes: Optional[Sequence[np.ndarray]] = None,
    s: float = 2.0,
    delta_diff: bool = False,
    n_probes: int = 64,
    seed: int = 0,
) -> ProbeReport:
    """Worst ||<k,xi>^s M Delta_L(c phi)^|| / ||<k,xi>^s M X^|| over probe right-hand sides X."""
    multiplier = ProbeMultiplier(multiplier)
    grid = profile.grid
    if coeff is None:
        coeff = profile.at(t).B
    if probes is None:
        probes = probe_set(grid, n_probes, seed)
    lap_t = linalg.lu_factor(EllipticOperatorSpec(EllipticKind.LAP_T, profile, t, k).matrix)
    lap_0 = linalg.lu_factor(EllipticOperatorSpec(EllipticKind.LAP_0, profile, t, k).matrix) if delta_diff else None
    shear = k ** 2 + (grid.eta - k * t) ** 2
    M = np.ones(grid.n_v) if multiplier is ProbeMultiplier.ONE else shear ** -0.5
    weight = (1.0 + k ** 2 + grid.eta ** 2) ** (s / 2.0) * M
    ratios = []
    for X in probes:
        phi = linalg.lu_solve(lap_t, X)
        if lap_0 is not None:
            phi = phi - linalg.lu_solve(lap_0, X)
        left = weight * (-shear) * grid.v_to_coeffs(coeff * phi)
        right = weight * grid.v_to_coeffs(X)
        ratios.append(float(np.linalg.norm(left) / np.linalg.norm(right)))
    return ProbeReport(k, t, multiplier, delta_diff, ratios)


@dataclass
class CStarRow:
    nu_t: float
    gamma: float
    delta_diff_ratio: float
    converges: bool


def empirical_cstar(profile: ShearProfile, k: int, nu_t_values: Sequence[float], s: float = 2.0):
    """Neumann contraction and Delta_t^{-1} - Delta_0^{-1} probe ratio along a nu*t list.

    Returns the rows and the largest nu*t for which every smaller value still contracts.
    """
    if profile.nu <= 0:
        raise InvalidInputError("c_* scan needs a positive viscosity")
    rows = []
    cstar = 0.0
    contracting = True
    for nu_t in sorted(nu_t_values):
        t = nu_t / profile.nu
        gamma = contraction_ratio(profile, k, t, s)
        ratio = elliptic_estimate_probe(profile, k, t, s=s, delta_diff=True, n_probes=16).worst
        rows.append(CStarRow(nu_t, gamma, ratio, gamma < 1))
        contracting = contracting and gamma < 1
        if contracting:
            cstar = nu_t
    return rows, cstar
