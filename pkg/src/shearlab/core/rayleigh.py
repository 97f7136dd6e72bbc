"""Discrete Rayleigh operator L_k g = b g - b'' phi with (d_y^2 - k^2) phi = g."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional

import numpy as np
from scipy import linalg

from shearlab.core.errors import InvalidInputError
from shearlab.core.grid import spectral_matrix
from shearlab.core.profile import ShearProfile

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
CONFIRMATION_DRIFT = 0.01


class SpectralVerdict(Enum):
    CONTINUOUS = "continuous"
    UNSTABLE = "unstable"
    INCONCLUSIVE = "inconclusive"

    @property
    def severity(self) -> int:
        return {SpectralVerdict.CONTINUOUS: 0, SpectralVerdict.INCONCLUSIVE: 1, SpectralVerdict.UNSTABLE: 2}[self]


@dataclass
class SpectrumReport:
    k: int
    eigenvalues: np.ndarray
    max_imag: float
    resolution: int
    verdict: SpectralVerdict
    tolerance: float
    refined_max_imag: Optional[float] = None
    meta: Dict[str, float] = field(default_factory=dict)

    def rows(self) -> List[List[float]]:
        return [[self.k, lam.real, lam.imag] for lam in self.eigenvalues]

    def to_dict(self) -> Dict[str, object]:
        return {
            "k": self.k,
            "max_imag": self.max_imag,
            "resolution": self.resolution,
            "verdict": self.verdict.value,
            "tolerance": self.tolerance,
            "refined_max_imag": self.refined_max_imag,
        }


def helmholtz_inverse(profile: ShearProfile, k: int) -> np.ndarray:
    """(d_y^2 - k^2)^{-1} on the periodic y samples."""
    return spectral_matrix(-1.0 / (profile.xi ** 2 + k ** 2)).real


def assemble_Lk(profile: ShearProfile, k: int) -> np.ndarray:
    if k == 0:
        raise InvalidInputError("the Rayleigh operator is defined for k != 0 only")
    H = helmholtz_inverse(profile, k)
    return np.diag(profile.b_samples) - profile.bsecond_samples[:, None] * H


def _eigenvalues(profile: ShearProfile, k: int) -> np.ndarray:
    return linalg.eig(assemble_Lk(profile, k), right=False)


def _most_unstable(eigenvalues: np.ndarray) -> complex:
    return complex(eigenvalues[np.argmax(eigenvalues.imag)])


def spectrum(profile: ShearProfile, k: int, tolerance: float = DEFAULT_TOLERANCE, confirm: bool = True) -> SpectrumReport:
    """Eigensolve at ``k``; a candidate unstable mode must survive a resolution doubling."""
    eigenvalues = _eigenvalues(profile, k)
    top = _most_unstable(eigenvalues)
    max_imag = max(float(top.imag), 0.0)
    report = SpectrumReport(k, eigenvalues, max_imag, profile.n_y, SpectralVerdict.CONTINUOUS, tolerance)
    if max_imag <= tolerance:
        return report
    if not confirm:
        report.verdict = SpectralVerdict.INCONCLUSIVE
        return report
    refined = _most_unstable(_eigenvalues(profile.refined(), k))
    report.refined_max_imag = float(refined.imag)
    drift = abs(refined - top) / abs(top)
    report.meta["refinement_drift"] = float(drift)
    if refined.imag > tolerance and drift <= CONFIRMATION_DRIFT:
        report.verdict = SpectralVerdict.UNSTABLE
    else:
        report.verdict = SpectralVerdict.INCONCLUSIVE
    logger.info(f"k={k}: candidate Im={max_imag:.3e}, refined Im={refined.imag:.3e}, verdict {report.verdict.value}")
    return report


def stability_verdict(
    profile: ShearProfile, k_range: Iterable[int], tolerance: float = DEFAULT_TOLERANCE
) -> List[SpectrumReport]:
    return [spectrum(profile, int(k), tolerance) for k in k_range]


def worst_verdict(reports: Iterable[SpectrumReport]) -> SpectralVerdict:
    worst = SpectralVerdict.CONTINUOUS
    for r in reports:
        if r.verdict.severity > worst.severity:
            worst = r.verdict
    return worst


def noise_floor(grid, nu: float = 0.0, k_range: Iterable[int] = range(1, 9)) -> float:
    """Largest |Im lambda| for Couette on ``grid``; tolerances must sit above it."""
    couette = ShearProfile.couette(grid, nu)
    return max(float(np.max(np.abs(_eigenvalues(couette, int(k)).imag))) for k in k_range)


def instability_onset(
    grid,
    k: int,
    width: float = 0.5,
    a_low: float = 0.0,
    a_high: float = 20.0,
    steps: int = 12,
    tolerance: float = DEFAULT_TOLERANCE,
) -> float:
    """Bisect the tanh-bump amplitude at which a mode with Im lambda > tolerance appears."""

    def unstable(a: float) -> bool:
        p = ShearProfile.tanh_bump(grid, 0.0, a, width)
        return spectrum(p, k, tolerance, confirm=False).max_imag > tolerance

    if unstable(a_low) or not unstable(a_high):
        raise InvalidInputError(f"amplitudes [{a_low}, {a_high}] do not bracket an instability at k={k}")
    for _ in range(steps):
        mid = 0.5 * (a_low + a_high)
        if unstable(mid):
            a_high = mid
        else:
            a_low = mid
    return a_high
