"""Monotone shear profiles b(t, y), their heat evolution and the v-frame coefficients.

A profile is stored as b(y) = y + c(y) where c' = g = b' - 1 is carried by its
Fourier coefficients on a periodic y box. Only g is heat evolved
(multiplier exp(-nu xi^2 t)), so the linear part is exact and the semigroup
property holds to rounding. The y samples share the v spacing h and sit
symmetrically about 0.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.interpolate import PchipInterpolator

from shearlab.core.errors import InvalidInputError, ProfileDegeneracyError
from shearlab.core.grid import Grid

logger = logging.getLogger(__name__)

INVERSE_REFINEMENT = 4
NEWTON_STEPS = 3
THETA_GUARD = 1e-10
MONOTONE_SLACK = 1e-8
SUPPORT_TAIL = 1e-3
GEVREY_FLOOR = 1e-13
GEVREY_MARGIN = 0.9
_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class ShearProfile:
    """Background shear b(t, y) with derived coefficients B, B' on the v grid."""

    name: str
    grid: Grid
    nu: float
    g_hat0: np.ndarray
    y0: float
    L_y: float
    t: float = 0.0
    sigma0_initial: Optional[float] = None
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.nu < 0:
            raise InvalidInputError(f"viscosity must be non-negative, got {self.nu}")
        if self.t < 0:
            raise InvalidInputError(f"profile time must be non-negative, got {self.t}")
        if self.sigma0_initial is None:
            bp = 1.0 + self._evaluate(self.y, self._strip(self.g_hat0)).real
            if np.min(bp) <= 0:
                raise ProfileDegeneracyError(f"{self.name}: b' reaches {np.min(bp):.3g}, profile is not monotone")
            object.__setattr__(self, "sigma0_initial", float(min(np.min(bp), 1.0 / np.max(bp))))
        lo, hi = self.b(np.array([self.y[0], self.y[-1]]))
        if lo > self.grid.v[0] or hi < self.grid.v[-1]:
            raise InvalidInputError(
                f"{self.name}: b maps the y box onto [{lo:.3g}, {hi:.3g}], which does not cover "
                f"the v box [{self.grid.v[0]:.3g}, {self.grid.v[-1]:.3g}]"
            )

    # construction

    @classmethod
    def from_derivative(cls, name: str, grid: Grid, nu: float, g: Callable[[np.ndarray], np.ndarray]) -> ShearProfile:
        """Build from g(y) = b'(y) - 1, which must decay inside the y box."""
        n_y = 2 * ((3 * grid.n_v) // 4)
        L_y = n_y * grid.h / 2.0
        y0 = -L_y + grid.h / 2.0
        y = y0 + grid.h * np.arange(n_y)
        samples = np.asarray(g(y), dtype=float)
        if np.min(1.0 + samples) <= 0:
            raise ProfileDegeneracyError(f"{name}: b' reaches {np.min(1.0 + samples):.3g}, profile is not monotone")
        edge = max(abs(samples[0]), abs(samples[-1]))
        if edge > 1e-6:
            logger.warning(f"{name}: b' - 1 is {edge:.2e} at the y-box edge; periodization will be visible")
        return cls(name, grid, nu, np.fft.fft(samples) / n_y, y0, L_y)

    @classmethod
    def couette(cls, grid: Grid, nu: float) -> ShearProfile:
        return cls.from_derivative("couette", grid, nu, np.zeros_like)

    @classmethod
    def tanh_bump(cls, grid: Grid, nu: float, amplitude: float = 0.5, width: float = 1.0) -> ShearProfile:
        if width <= 0:
            raise InvalidInputError(f"tanh-bump width must be positive, got {width}")
        return cls.from_derivative(
            f"tanh-bump:{amplitude:g},{width:g}", grid, nu, lambda y: amplitude / np.cosh(y / width) ** 2
        )

    @classmethod
    def gevrey_bump(cls, grid: Grid, nu: float, amplitude: float = 0.5, radius: float = 1.5) -> ShearProfile:
        """b' - 1 = amplitude * exp(1 - 1/(1 - (y/radius)^2)) on |y| < radius."""
        if radius <= 0:
            raise InvalidInputError(f"gevrey-bump radius must be positive, got {radius}")

        def g(y):
            u = y / radius
            out = np.zeros_like(y)
            inside = np.abs(u) < 1.0
            out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
            return out

        return cls.from_derivative(f"gevrey-bump:{amplitude:g},{radius:g}", grid, nu, g)

    @classmethod
    def from_csv(cls, path: Union[str, Path], grid: Grid, nu: float) -> ShearProfile:
        """Load (y, b) samples; b' is taken from a monotone cubic fit and held constant beyond the data."""
        path = Path(path)
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError:
            data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
        if data.shape[1] < 2:
            raise InvalidInputError(f"{path}: expected two columns (y, b)")
        order = np.argsort(data[:, 0])
        ys, bs = data[order, 0], data[order, 1]
        if np.any(np.diff(bs) <= 0):
            raise ProfileDegeneracyError(f"{path}: b is not strictly increasing")
        slope = PchipInterpolator(ys, bs).derivative()
        return cls.from_derivative(path.stem, grid, nu, lambda y: slope(np.clip(y, ys[0], ys[-1])) - 1.0)

    # Fourier bookkeeping

    @property
    def n_y(self) -> int:
        return len(self.g_hat0)

    @cached_property
    def xi(self) -> np.ndarray:
        return (np.pi / self.L_y) * np.fft.fftfreq(self.n_y, 1.0 / self.n_y)

    @cached_property
    def y(self) -> np.ndarray:
        return self.y0 + (2.0 * self.L_y / self.n_y) * np.arange(self.n_y)

    @cached_property
    def g_hat(self) -> np.ndarray:
        return self.g_hat0 * np.exp(-self.nu * self.xi ** 2 * self.t)

    def _strip(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.array(coeffs, dtype=complex)
        out[self.n_y // 2] = 0.0
        return out

    def _evaluate(self, y: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for start in range(0, flat.size, _CHUNK):
            seg = flat[start:start + _CHUNK]
            out[start:start + _CHUNK] = np.exp(1j * np.outer(seg - self.y0, self.xi)) @ coeffs
        return out.reshape(y.shape)

    @cached_property
    def _antiderivative(self):
        nonzero = self.xi != 0
        periodic = np.zeros(self.n_y, dtype=complex)
        periodic[nonzero] = self.g_hat[nonzero] / (1j * self.xi[nonzero])
        anchor = np.zeros(self.n_y, dtype=complex)
        anchor[nonzero] = self.g_hat0[nonzero] / (1j * self.xi[nonzero])
        offset = (self._strip(anchor) @ np.exp(-1j * self.xi * self.y0)).real
        return self._strip(periodic), offset

    # pointwise evaluation

    def g(self, y) -> np.ndarray:
        return self._evaluate(y, self._strip(self.g_hat)).real

    def b(self, y) -> np.ndarray:
        periodic, offset = self._antiderivative
        y = np.asarray(y, dtype=float)
        return y + self.g_hat0[0].real * y + self._evaluate(y, periodic).real - offset

    def bprime(self, y) -> np.ndarray:
        return 1.0 + self.g(y)

    def bsecond(self, y) -> np.ndarray:
        return self._evaluate(y, self._strip(1j * self.xi * self.g_hat)).real

    @cached_property
    def b_samples(self) -> np.ndarray:
        return self.b(self.y)

    @cached_property
    def bprime_samples(self) -> np.ndarray:
        return self.bprime(self.y)

    @cached_property
    def bsecond_samples(self) -> np.ndarray:
        return self.bsecond(self.y)

    @property
    def sigma0(self) -> float:
        bp = self.bprime_samples
        return float(min(np.min(bp), 1.0 / np.max(bp)))

    @property
    def is_couette(self) -> bool:
        return not np.any(self.g_hat0)

    # inverse and v-frame coefficients

    @cached_property
    def _inverse_interpolant(self) -> PchipInterpolator:
        n_ref = INVERSE_REFINEMENT * self.n_y
        y_ref = self.y0 + (2.0 * self.L_y / n_ref) * np.arange(n_ref)
        return PchipInterpolator(self.b(y_ref), y_ref, extrapolate=True)

    def b_inverse(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        y = self._inverse_interpolant(v)
        for _ in range(NEWTON_STEPS):
            y = y - (self.b(y) - v) / self.bprime(y)
        return y

    @cached_property
    def y_of_v(self) -> np.ndarray:
        return self.b_inverse(self.grid.v)

    @cached_property
    def B(self) -> np.ndarray:
        """B(t, v) = b'(t, b^{-1}(t, v)) on the v grid."""
        return 1.0 + self.g(self.y_of_v)

    @cached_property
    def dvB(self) -> np.ndarray:
        coeffs = self.grid.v_to_coeffs(self.B - 1.0)
        return self.grid.coeffs_to_v(1j * self.grid.eta * coeffs).real

    @cached_property
    def Bprime(self) -> np.ndarray:
        """B' = B dB/dv by spectral differentiation of B."""
        return self.B * self.dvB

    @cached_property
    def Bprime_exact(self) -> np.ndarray:
        """b''(t, b^{-1}(t, v)), which B' equals in the continuum."""
        return self.bsecond(self.y_of_v)

    @property
    def theta0(self) -> float:
        return float(np.min(self.B) - THETA_GUARD)

    def B_at(self, v) -> np.ndarray:
        return 1.0 + self.g(self.b_inverse(v))

    def Bprime_at(self, v) -> np.ndarray:
        return self.bsecond(self.b_inverse(v))

    def coefficient_B(self):
        """(B, B') on the v grid."""
        if np.min(self.B) <= 0:
            raise ProfileDegeneracyError(f"{self.name}: B reached {np.min(self.B):.3g}")
        return self.B, self.Bprime

    # evolution

    def at(self, t: float) -> ShearProfile:
        """The profile heat-evolved from its initial state to time ``t``."""
        if t < 0:
            raise InvalidInputError(f"time must be non-negative, got {t}")
        if t == self.t:
            return self
        key = f"t={t!r}"
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        out = replace(self, t=float(t), _cache={})
        bp = out.bprime_samples
        lo, hi = self.sigma0_initial - MONOTONE_SLACK, 1.0 / self.sigma0_initial + MONOTONE_SLACK
        if np.min(bp) < lo or np.max(bp) > hi:
            raise ProfileDegeneracyError(
                f"{self.name}: b' left [{lo:.6g}, {hi:.6g}] at t={t:g} "
                f"(range [{np.min(bp):.6g}, {np.max(bp):.6g}]); the y grid is under-resolved"
            )
        if len(self._cache) < 64:
            self._cache[key] = out
        return out

    def evolve_heat(self, dt: float) -> ShearProfile:
        if dt < 0:
            raise InvalidInputError(f"heat step must be non-negative, got {dt}")
        return self.at(self.t + dt)

    @property
    def initial(self) -> ShearProfile:
        return self.at(0.0)

    def refined(self, factor: int = 2) -> ShearProfile:
        """Same profile on a ``factor``-times finer grid (zero-padded spectrum)."""
        n = self.n_y
        half = n // 2
        padded = np.zeros(factor * n, dtype=complex)
        padded[:half] = self.g_hat0[:half]
        padded[-half + 1:] = self.g_hat0[-half + 1:]
        padded[half] = padded[-half] = self.g_hat0[half] / 2.0
        return ShearProfile(
            self.name, self.grid.refined(factor), self.nu, padded, self.y0, self.L_y, self.t, self.sigma0_initial
        )

    # cross-checks

    def heat_kernel_bprime(self, y, n_nodes: int = 80) -> np.ndarray:
        """b'(t, y) by Gauss-Hermite quadrature of the heat kernel against b'(0, .)."""
        y = np.asarray(y, dtype=float)
        initial = self._strip(self.g_hat0)
        if self.t == 0 or self.nu == 0:
            return 1.0 + self._evaluate(y, initial).real
        nodes, weights = hermgauss(n_nodes)
        spread = np.sqrt(4.0 * self.nu * self.t)
        shifted = y[..., None] + spread * nodes
        values = 1.0 + self._evaluate(shifted, initial).real
        return values @ weights / np.sqrt(np.pi)

    def B_heat_kernel(self, n_nodes: int = 80) -> np.ndarray:
        return self.heat_kernel_bprime(self.y_of_v, n_nodes)


def load_profile(spec: str, grid: Grid, nu: float) -> ShearProfile:
    """Resolve ``couette``, ``tanh-bump:a,w``, ``gevrey-bump:a,r`` or a CSV path."""
    if spec.lower().endswith(".csv"):
        return ShearProfile.from_csv(spec, grid, nu)
    name, _, args = spec.partition(":")
    try:
        params = [float(p) for p in args.split(",")] if args else []
    except ValueError as e:
        raise InvalidInputError(f"bad profile parameters in {spec!r}: {e}") from e
    name = name.strip().lower()
    if name == "couette":
        return ShearProfile.couette(grid, nu)
    if name == "tanh-bump":
        return ShearProfile.tanh_bump(grid, nu, *params[:2])
    if name == "gevrey-bump":
        return ShearProfile.gevrey_bump(grid, nu, *params[:2])
    raise InvalidInputError(f"unknown profile {spec!r}")


@dataclass
class AssumptionReport:
    name: str
    sigma0: float
    bprime_min: float
    bprime_max: float
    monotone_ok: bool
    support_radius: float
    support_limit: float
    support_ok: bool
    gevrey_theta: float
    gevrey_ok: bool
    theta0: float
    spectral_verdict: Optional[str] = None
    spectral_ok: Optional[bool] = None

    @property
    def passed(self) -> bool:
        checks = [self.monotone_ok, self.support_ok, self.gevrey_ok]
        if self.spectral_ok is not None:
            checks.append(self.spectral_ok)
        return all(checks)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def support_radius(profile: ShearProfile, tail: float = SUPPORT_TAIL) -> float:
    """Largest |y| where |b''| exceeds ``tail`` times its maximum."""
    b2 = np.abs(profile.bsecond_samples)
    peak = np.max(b2)
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(profile.y[b2 > tail * peak])))


def v_support_radius(profile: ShearProfile, tail: float = SUPPORT_TAIL) -> float:
    """Largest |v| on the grid where |d_v B| exceeds ``tail`` times its maximum."""
    _, Bp = profile.coefficient_B()
    magnitude = np.abs(Bp)
    peak = np.max(magnitude)
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(profile.grid.v[magnitude > tail * peak])))


def gevrey_decay_fit(profile: ShearProfile) -> float:
    """Slope theta of log |xi g_hat| against <xi>^{1/2} on the running-max envelope."""
    n = profile.n_y
    xi = profile.xi[1:n // 2]
    spectrum = np.abs(xi * profile.g_hat[1:n // 2])
    keep = xi <= (2.0 / 3.0) * np.max(np.abs(profile.xi))
    xi, spectrum = xi[keep], spectrum[keep]
    if spectrum.size == 0 or np.max(spectrum) == 0:
        return float("inf")
    envelope = np.maximum.accumulate(spectrum[::-1])[::-1]
    mask = envelope > GEVREY_FLOOR * np.max(envelope)
    if np.count_nonzero(mask) < 3:
        return float("inf")
    slope, _ = np.polyfit(np.sqrt(np.sqrt(1.0 + xi[mask] ** 2)), np.log(envelope[mask]), 1)
    return float(-slope)


def check_assumption(
    profile: ShearProfile, k_max: Optional[int] = None, spectrum_tolerance: float = 1e-6, tolerance: float = 1e-6
) -> AssumptionReport:
    """Monotonicity needs min b' > ``tolerance``; the b'' support may exceed 1/sigma0 by ``tolerance``."""
    bp = profile.bprime_samples
    sigma0 = profile.sigma0
    radius = support_radius(profile)
    theta = gevrey_decay_fit(profile)
    report = AssumptionReport(
        name=profile.name,
        sigma0=sigma0,
        bprime_min=float(np.min(bp)),
        bprime_max=float(np.max(bp)),
        monotone_ok=bool(np.min(bp) > tolerance),
        support_radius=radius,
        support_limit=1.0 / sigma0,
        support_ok=bool(radius <= 1.0 / sigma0 + tolerance),
        gevrey_theta=theta,
        gevrey_ok=bool(theta >= GEVREY_MARGIN * sigma0),
        theta0=profile.theta0,
    )
    if k_max:
        from shearlab.core.rayleigh import stability_verdict, worst_verdict

        verdict = worst_verdict(stability_verdict(profile, range(1, k_max + 1), spectrum_tolerance))
        report.spectral_verdict = verdict.value
        report.spectral_ok = verdict.value == "continuous"
    logger.info(f"Assumption check for {profile.name}: {'pass' if report.passed else 'fail'}")
    return report


def _probe_coefficients(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    modes = np.arange(-min(grid.n_v // 6, 16), min(grid.n_v // 6, 16) + 1)
    c = np.zeros(grid.n_v, dtype=complex)
    c[modes % grid.n_v] = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
    return c


def coefficient_drift(
    profile: ShearProfile, t: float, alpha: int = 0, s: float = 2.0, n_probes: int = 8, k: int = 1, seed: int = 0
) -> float:
    """Worst ratio ||<k,eta>^s [(d_v^alpha B(t) - d_v^alpha B(0)) f]|| / ||<k,eta>^s f|| over probes."""
    now, start = profile.at(t), profile.initial
    if alpha == 0:
        diff = now.B - start.B
    elif alpha == 1:
        diff = now.dvB - start.dvB
    else:
        raise InvalidInputError(f"alpha must be 0 or 1, got {alpha}")
    if not np.any(diff):
        return 0.0
    grid = profile.grid
    weight = (1.0 + k ** 2 + grid.eta ** 2) ** (s / 2.0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        c = _probe_coefficients(grid, rng)
        product = grid.v_to_coeffs(diff * grid.coeffs_to_v(c))
        worst = max(worst, float(np.linalg.norm(weight * product) / np.linalg.norm(weight * c)))
    return worst


def probe_set(grid: Grid, n_probes: int, seed: int = 0) -> Sequence[np.ndarray]:
    """Seeded v-sample probes built on a resolution-independent mode set."""
    rng = np.random.default_rng(seed)
    return [grid.coeffs_to_v(_probe_coefficients(grid, rng)) for _ in range(n_probes)]
