"""Discrete function spaces on the periodized (z, v) box and moving-frame symbols.

Fields are sampled at z_i = 2*pi*i/n_z and v_j = -L_v + j*h with h = 2*L_v/n_v.
Coefficients are ``fft2(samples) / (n_z * n_v)`` so that ``coeffs[0, 0]`` is the
spatial mean; the v phase origin sits at v = -L_v. Axis 0 carries the z
wavenumber k, axis 1 the v frequency eta, both in numpy FFT order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Union

import numpy as np

from shearlab.core.errors import DegenerateSymbolError, InvalidInputError

logger = logging.getLogger(__name__)


class Operator(Enum):
    DZ = "dz"
    DV = "dv"
    TILT = "tilt"
    LAPLACE = "lap"
    INV_LAPLACE = "inv_lap"
    HALF = "half"
    INV_HALF = "inv_half"

    @property
    def inverts(self) -> bool:
        return self in (Operator.INV_LAPLACE, Operator.INV_HALF)


@dataclass(frozen=True)
class Grid:
    """Truncated Fourier grid on T_z x [-L_v, L_v)."""

    n_z: int
    n_v: int
    L_v: float
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        for name in ("n_z", "n_v"):
            n = getattr(self, name)
            if int(n) != n or n <= 0 or n % 2:
                raise InvalidInputError(f"{name} must be an even positive integer, got {n}")
        if not self.L_v > 0:
            raise InvalidInputError(f"L_v must be positive, got {self.L_v}")
        if not 0 < self.dealias_fraction <= 1:
            raise InvalidInputError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

    @property
    def shape(self):
        return (self.n_z, self.n_v)

    @property
    def h(self) -> float:
        return 2.0 * self.L_v / self.n_v

    @property
    def area(self) -> float:
        return 2.0 * np.pi * 2.0 * self.L_v

    @cached_property
    def k(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_z, 1.0 / self.n_z)

    @cached_property
    def eta(self) -> np.ndarray:
        return (np.pi / self.L_v) * np.fft.fftfreq(self.n_v, 1.0 / self.n_v)

    @cached_property
    def z(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_z) / self.n_z

    @cached_property
    def v(self) -> np.ndarray:
        return -self.L_v + self.h * np.arange(self.n_v)

    @cached_property
    def mesh(self):
        """(K, ETA) arrays of shape (n_z, n_v)."""
        return np.meshgrid(self.k, self.eta, indexing="ij")

    def _retained(self, n: int) -> np.ndarray:
        m = np.fft.fftfreq(n, 1.0 / n)
        cutoff = np.floor(self.dealias_fraction * n / 2.0)
        return np.abs(m) <= cutoff

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.outer(self._retained(self.n_z), self._retained(self.n_v))

    @property
    def k_retained_max(self) -> int:
        return int(np.max(np.abs(self.k[self._retained(self.n_z)])))

    @property
    def eta_retained_max(self) -> float:
        return float(np.max(np.abs(self.eta[self._retained(self.n_v)])))

    def bracket(self, s: float, t: float = 0.0, tilt: bool = False) -> np.ndarray:
        """<k, eta>^s, or <k, eta - k t>^s with ``tilt``."""
        K, E = self.mesh
        eta = E - K * t if tilt else E
        return (1.0 + K ** 2 + eta ** 2) ** (s / 2.0)

    def symbol(self, op: Union[Operator, str], t: float = 0.0) -> np.ndarray:
        """Fourier symbol of ``op`` at time ``t``; k = 0 entries of P_neq tags are 0."""
        op = Operator(op)
        K, E = self.mesh
        shear = E - K * t
        if op is Operator.DZ:
            return 1j * K
        if op is Operator.DV:
            return 1j * E
        if op is Operator.TILT:
            return 1j * shear
        lap = -(K ** 2 + shear ** 2)
        if op is Operator.LAPLACE:
            return lap.astype(complex)
        nonzero = K != 0
        out = np.zeros(self.shape, dtype=complex)
        if op is Operator.INV_LAPLACE:
            out[nonzero] = 1.0 / lap[nonzero]
        elif op is Operator.HALF:
            out[nonzero] = np.sqrt(-lap[nonzero])
        else:
            out[nonzero] = 1.0 / np.sqrt(-lap[nonzero])
        return out

    @cached_property
    def derivative_matrix(self) -> np.ndarray:
        """Dense Fourier differentiation matrix on the v samples (complex)."""
        return spectral_matrix(1j * self.eta)

    def refined(self, factor: int = 2) -> Grid:
        return replace(self, n_v=self.n_v * factor)

    def v_to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values, axis=-1) / self.n_v

    def coeffs_to_v(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs, axis=-1) * self.n_v


def spectral_matrix(symbol: np.ndarray) -> np.ndarray:
    """Matrix of the Fourier multiplier ``symbol`` acting on periodic samples."""
    n = symbol.shape[0]
    eye = np.eye(n)
    return np.fft.ifft(symbol[:, None] * np.fft.fft(eye, axis=0), axis=0)


@dataclass
class SpectralField:
    """Fourier coefficients indexed (k, eta) on a Grid."""

    grid: Grid
    coeffs: np.ndarray
    reality_flag: bool = True
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != self.grid.shape:
            raise InvalidInputError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralField:
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def copy(self) -> SpectralField:
        return SpectralField(self.grid, self.coeffs.copy(), self.reality_flag, dict(self.meta))

    def with_coeffs(self, coeffs: np.ndarray, reality_flag: Optional[bool] = None) -> SpectralField:
        flag = self.reality_flag if reality_flag is None else reality_flag
        return SpectralField(self.grid, coeffs, flag)

    def p0(self) -> SpectralField:
        out = np.zeros_like(self.coeffs)
        out[self.grid.k == 0, :] = self.coeffs[self.grid.k == 0, :]
        return self.with_coeffs(out)

    def pneq(self) -> SpectralField:
        out = self.coeffs.copy()
        out[self.grid.k == 0, :] = 0.0
        return self.with_coeffs(out)

    def norm(self) -> float:
        """Physical L2 norm via Parseval."""
        return float(np.sqrt(self.grid.area * np.sum(np.abs(self.coeffs) ** 2)))

    def sobolev_norm(self, s: float) -> float:
        w = self.grid.bracket(s)
        return float(np.sqrt(self.grid.area * np.sum(np.abs(w * self.coeffs) ** 2)))

    def reality_defect(self) -> float:
        """Relative size of coeff(-k,-eta) - conj(coeff(k,eta))."""
        c = self.coeffs
        mirrored = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
        scale = np.max(np.abs(c))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(mirrored - np.conj(c))) / scale)


def transform(physical: np.ndarray, grid: Grid) -> SpectralField:
    physical = np.asarray(physical)
    if physical.shape != grid.shape:
        raise InvalidInputError(f"array shape {physical.shape} does not match grid {grid.shape}")
    coeffs = np.fft.fft2(physical) / (grid.n_z * grid.n_v)
    return SpectralField(grid, coeffs, reality_flag=bool(np.isrealobj(physical)))


def inverse_transform(f: SpectralField, complex_output: bool = False) -> np.ndarray:
    values = np.fft.ifft2(f.coeffs) * (f.grid.n_z * f.grid.n_v)
    if complex_output:
        return values
    return values.real


def apply_operator(f: SpectralField, op: Union[Operator, str], t: float = 0.0, strict: bool = False) -> SpectralField:
    """Multiply ``f`` by the symbol of ``op``.

    Inverse and half-power tags act on P_neq; their k = 0 output is zero. With
    ``strict`` an inverse tag on a field carrying k = 0 content is rejected.
    """
    op = Operator(op)
    if strict and op.inverts and np.any(f.coeffs[f.grid.k == 0, :] != 0):
        raise DegenerateSymbolError(f"{op.value} applied to a field with zero-mode content")
    return f.with_coeffs(f.grid.symbol(op, t) * f.coeffs)


def dealias(f: SpectralField) -> SpectralField:
    return f.with_coeffs(np.where(f.grid.dealias_mask, f.coeffs, 0.0))
