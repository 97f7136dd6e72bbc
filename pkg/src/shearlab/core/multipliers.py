"""Time-dependent Fourier weights W_nu, W_I, W_I_circ, W_E and the norm multiplier A.

Every weight is evaluated together with its exact t and eta derivatives. All
evaluators broadcast over (t, k, eta) and return a float for scalar input.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import polygamma

from shearlab.core.errors import InvalidInputError, RegimeMismatchError
from shearlab.core.grid import SpectralField

logger = logging.getLogger(__name__)

_CHUNK = 4096
_SLACK = 1e-12


class Weight(Enum):
    NU = "nu"
    I = "I"
    I_CIRC = "I_circ"
    E = "E"


class Regime(Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class MultiplierSpec:
    nu: float
    K: float = 32.0
    delta: float = 1.0 / 64.0
    s: float = 2.0
    l_sum: int = 128
    regime: Optional[Regime] = None

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidInputError(f"nu must be positive, got {self.nu}")
        if self.K < 1:
            raise InvalidInputError(f"K must be >= 1, got {self.K}")
        if not 0 < self.delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.s < 2:
            raise InvalidInputError(f"s must be >= 2, got {self.s}")
        if int(self.l_sum) != self.l_sum or self.l_sum < 1:
            raise InvalidInputError(f"l_sum must be a positive integer, got {self.l_sum}")
        if self.regime is not None and not isinstance(self.regime, Regime):
            object.__setattr__(self, "regime", Regime(self.regime))

    @property
    def t_switch(self) -> float:
        return self.nu ** (-1.0 / 6.0)

    @property
    def k_cutoff(self) -> float:
        return self.nu ** (-0.5)

    def regime_at(self, t: float) -> Regime:
        return Regime.SHORT if t <= self.t_switch else Regime.LONG

    def short_mask(self, t) -> np.ndarray:
        """Boolean mask of short-regime times; rejects times outside a pinned regime."""
        t = np.asarray(t, dtype=float)
        short = t <= self.t_switch
        if self.regime is Regime.SHORT and not np.all(short):
            raise RegimeMismatchError(f"t up to {np.max(t):.4g} exceeds the short-regime end {self.t_switch:.4g}")
        if self.regime is Regime.LONG and np.any(short):
            raise RegimeMismatchError(f"t down to {np.min(t):.4g} lies before the long regime {self.t_switch:.4g}")
        return short

    @classmethod
    def from_dict(cls, data: Dict[str, Any], nu: float) -> MultiplierSpec:
        regime = data.get("regime")
        return cls(
            nu=nu,
            K=float(data.get("K", 32.0)),
            delta=float(data.get("delta", 1.0 / 64.0)),
            s=float(data.get("s", 2.0)),
            l_sum=int(data.get("l_sum", 128)),
            regime=Regime(regime) if regime else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["regime"] = self.regime.value if self.regime else None
        return d


def _prepare(t, k, eta):
    scalar = np.ndim(t) == 0 and np.ndim(k) == 0 and np.ndim(eta) == 0
    t, k, eta = np.broadcast_arrays(np.asarray(t, float), np.asarray(k, float), np.asarray(eta, float))
    return scalar, t, k, eta


def _finish(scalar: bool, *arrays):
    out = tuple(float(a) if scalar else a for a in arrays)
    return out if len(out) > 1 else out[0]


def _w_nu(spec: MultiplierSpec, t, k, eta):
    W = np.full(t.shape, np.pi)
    Wt = np.zeros(t.shape)
    We = np.zeros(t.shape)
    on = (k != 0) & (np.abs(k) <= spec.k_cutoff)
    kk = k[on]
    a = spec.nu ** (1.0 / 3.0) * np.abs(kk) ** (2.0 / 3.0) / spec.K
    X = a * (t[on] - eta[on] / kk)
    W[on] = np.pi - np.arctan(X)
    Wt[on] = -a / (1.0 + X ** 2)
    We[on] = a / (kk * (1.0 + X ** 2))
    return W, Wt, We


def _w_inviscid(spec: MultiplierSpec, t, k, eta):
    W = np.full(t.shape, np.pi)
    Wt = np.zeros(t.shape)
    We = np.zeros(t.shape)
    on = k != 0
    kk = k[on]
    Z = (t[on] - eta[on] / kk) / spec.K
    W[on] = np.pi - np.arctan(Z)
    Wt[on] = -(1.0 / spec.K) / (1.0 + Z ** 2)
    We[on] = (1.0 / (spec.K * kk)) / (1.0 + Z ** 2)
    return W, Wt, We


def _w_inviscid_circ(spec: MultiplierSpec, t, k, eta):
    Y = 2.0 * (eta - t / 2.0) / spec.K
    return np.pi + np.arctan(Y), -(1.0 / spec.K) / (1.0 + Y ** 2), (2.0 / spec.K) / (1.0 + Y ** 2)


def echo_tail(spec: MultiplierSpec) -> float:
    """sum_{|l| > L} |l|^-2 = 2 psi_1(L + 1)."""
    return float(2.0 * polygamma(1, spec.l_sum + 1))


def _w_echo(spec: MultiplierSpec, t, k, eta):
    W = np.full(t.shape, np.pi)
    Wt = np.zeros(t.shape)
    We = np.zeros(t.shape)
    on = np.abs(k) < spec.k_cutoff
    if not np.any(on):
        return W, Wt, We
    ell = np.concatenate([np.arange(-spec.l_sum, 0), np.arange(1, spec.l_sum + 1)]).astype(float)
    inv2 = 1.0 / ell ** 2
    sign = np.sign(ell)
    tail = echo_tail(spec)
    K = spec.K
    tt, kk, ee = t[on], k[on], eta[on]
    vals = np.empty(tt.shape)
    dts = np.empty(tt.shape)
    detas = np.empty(tt.shape)
    for start in range(0, tt.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        D = 1.0 + np.abs(kk[sl, None] - ell) + np.abs(ell)
        gap = ee[sl, None] - ell * tt[sl, None]
        X = gap / (K * D)
        damp = 1.0 / (1.0 + X ** 2)
        vals[sl] = (np.arctan(X) * (sign * inv2)).sum(axis=1)
        dts[sl] = -(np.abs(ell) ** -1.0 * D / (K * D ** 2 + gap ** 2 / K)).sum(axis=1)
        detas[sl] = (damp / (K * D) * (sign * inv2)).sum(axis=1)
    T = tt / (2.0 * K)
    W[on] = np.pi + (vals - np.arctan(T) * tail) / np.pi ** 2
    Wt[on] = (dts - tail * (1.0 / (2.0 * K)) / (1.0 + T ** 2)) / np.pi ** 2
    We[on] = detas / np.pi ** 2
    return W, Wt, We


_WEIGHTS = {
    Weight.NU: _w_nu,
    Weight.I: _w_inviscid,
    Weight.I_CIRC: _w_inviscid_circ,
    Weight.E: _w_echo,
}


def weight_parts(spec: MultiplierSpec, which, t, k, eta):
    """(W, dW/dt, dW/deta) for one weight."""
    scalar, t, k, eta = _prepare(t, k, eta)
    which = Weight(which)
    if which is Weight.I_CIRC and not np.all(spec.short_mask(t)):
        raise RegimeMismatchError("W_I_circ is used in the short regime only")
    shape = t.shape
    parts = _WEIGHTS[which](spec, t.ravel(), k.ravel(), eta.ravel())
    return _finish(scalar, *(p.reshape(shape) for p in parts))


def eval_W(spec: MultiplierSpec, which, t, k, eta):
    return weight_parts(spec, which, t, k, eta)[0]


def M_parts(spec: MultiplierSpec, t, k, eta):
    """(M, dM/dt, dM/deta); short regime uses W_I_circ at k = 0 and W_I elsewhere."""
    scalar, t, k, eta = _prepare(t, k, eta)
    shape = t.shape
    t, k, eta = t.ravel(), k.ravel(), eta.ravel()
    short = spec.short_mask(t)
    M = np.empty(t.shape)
    Mt = np.empty(t.shape)
    Me = np.empty(t.shape)

    zero = short & (k == 0)
    if np.any(zero):
        M[zero], Mt[zero], Me[zero] = _w_inviscid_circ(spec, t[zero], k[zero], eta[zero])
    early = short & (k != 0)
    if np.any(early):
        M[early], Mt[early], Me[early] = _w_inviscid(spec, t[early], k[early], eta[early])
    late = ~short
    if np.any(late):
        a, at, ae = _w_nu(spec, t[late], k[late], eta[late])
        b, bt, be = _w_inviscid(spec, t[late], k[late], eta[late])
        c, ct, ce = _w_echo(spec, t[late], k[late], eta[late])
        M[late] = a * b * c
        Mt[late] = at * b * c + a * bt * c + a * b * ct
        Me[late] = ae * b * c + a * be * c + a * b * ce
    return _finish(scalar, M.reshape(shape), Mt.reshape(shape), Me.reshape(shape))


def eval_M(spec: MultiplierSpec, t, k, eta):
    return M_parts(spec, t, k, eta)[0]


def dt_M(spec: MultiplierSpec, t, k, eta):
    return M_parts(spec, t, k, eta)[1]


def deta_M(spec: MultiplierSpec, t, k, eta):
    return M_parts(spec, t, k, eta)[2]


def bracket(spec: MultiplierSpec, k, eta):
    return (1.0 + np.asarray(k, float) ** 2 + np.asarray(eta, float) ** 2) ** (spec.s / 2.0)


def eval_zeta(spec: MultiplierSpec, t, k):
    scalar = np.ndim(t) == 0 and np.ndim(k) == 0
    t, k = np.broadcast_arrays(np.asarray(t, float), np.asarray(k, float))
    rate = dt_log_zeta(spec, k)
    out = np.exp(rate * t)
    return float(out) if scalar else out


def dt_log_zeta(spec: MultiplierSpec, k):
    """d/dt log zeta_k, zero at k = 0."""
    k = np.asarray(k, float)
    return np.where(k != 0, spec.delta * spec.nu ** (1.0 / 3.0) * (np.abs(k) ** (2.0 / 3.0) + 1.0), 0.0)


def eval_M_and_A(spec: MultiplierSpec, t, k, eta):
    """(M, A_tilde = M <k,eta>^s, A = zeta_k A_tilde)."""
    M = eval_M(spec, t, k, eta)
    A_tilde = M * bracket(spec, k, eta)
    return M, A_tilde, eval_zeta(spec, t, k) * A_tilde


def ck_weight(spec: MultiplierSpec, which, t, k, eta):
    """-dW/dt / W, the Cauchy-Kovalevskaya weight of one factor."""
    which = Weight(which)
    if which is Weight.I_CIRC:
        raise InvalidInputError("CK weights are defined for nu, I and E")
    W, Wt, _ = weight_parts(spec, which, t, k, eta)
    return -Wt / W


class NormExtra(Enum):
    ONE = "one"
    DZ13 = "dz13"
    GRAD_L = "grad_l"
    CK_NU = "ck_nu"
    CK_I = "ck_I"
    CK_E = "ck_E"


def multiplier_grid(spec: MultiplierSpec, grid, t: float) -> np.ndarray:
    """A(t, k, eta) on the grid mesh."""
    K, E = grid.mesh
    return eval_M_and_A(spec, t, K, E)[2]


def extra_symbol(spec: MultiplierSpec, grid, t: float, extra) -> np.ndarray:
    extra = NormExtra(extra)
    K, E = grid.mesh
    if extra is NormExtra.ONE:
        return np.ones(grid.shape)
    if extra is NormExtra.DZ13:
        return np.abs(K) ** (1.0 / 3.0)
    if extra is NormExtra.GRAD_L:
        return np.sqrt(K ** 2 + (E - K * t) ** 2)
    which = {NormExtra.CK_NU: Weight.NU, NormExtra.CK_I: Weight.I, NormExtra.CK_E: Weight.E}[extra]
    return np.sqrt(np.maximum(ck_weight(spec, which, t, K, E), 0.0))


def weighted_norm(f: SpectralField, spec: MultiplierSpec, t: float, extra="one", A: Optional[np.ndarray] = None) -> float:
    """Squared l2 sum of |A * extra * f_hat| over the dealias-retained modes."""
    if A is None:
        A = multiplier_grid(spec, f.grid, t)
    weighted = A * extra_symbol(spec, f.grid, t, extra) * f.coeffs
    return float(np.sum(np.abs(weighted[f.grid.dealias_mask]) ** 2))


def ghost_commutator_check(
    spec: MultiplierSpec, which, coeff: np.ndarray, f: SpectralField, t: float = 0.0
) -> float:
    """K ||[m, c] f|| / ||m f|| with c acting by multiplication in v."""
    grid = f.grid
    K, E = grid.mesh
    m = eval_W(spec, which, np.full(grid.shape, float(t)), K, E)
    coeff = np.asarray(coeff, dtype=float)

    def times_coeff(c: np.ndarray) -> np.ndarray:
        return grid.v_to_coeffs(coeff * grid.coeffs_to_v(c))

    commutator = m * times_coeff(f.coeffs) - times_coeff(m * f.coeffs)
    denominator = np.linalg.norm(m * f.coeffs)
    if denominator == 0:
        return 0.0
    return float(spec.K * np.linalg.norm(commutator) / denominator)


@dataclass
class AuditResult:
    name: str
    n_points: int
    violations: int
    worst_margin: float
    worst_point: Tuple[float, float, float] = field(default=(np.nan, np.nan, np.nan))

    @property
    def passed(self) -> bool:
        return self.violations == 0

    HEADER = ["inequality", "passed", "points", "violations", "worst_margin", "t", "k", "eta"]

    def to_row(self) -> List[Any]:
        return [self.name, int(self.passed), self.n_points, self.violations, self.worst_margin, *self.worst_point]


def _summarize(name: str, margin: np.ndarray, t, k, eta) -> AuditResult:
    if margin.size == 0:
        return AuditResult(name, 0, 0, float("inf"))
    i = int(np.argmin(margin))
    result = AuditResult(
        name, int(margin.size), int(np.count_nonzero(margin < 0)), float(margin[i]), (float(t[i]), float(k[i]), float(eta[i]))
    )
    level = logging.WARNING if result.violations else logging.DEBUG
    logger.log(level, f"{name}: {result.violations}/{result.n_points} violations, worst margin {result.worst_margin:.3e}")
    return result


def sample_points(spec: MultiplierSpec, n_points: int, regime: Regime, seed: int = 0):
    """Random (t, k, eta); half of the eta values sit near the critical time eta = k t."""
    rng = np.random.default_rng(seed)
    k_top = int(np.ceil(spec.k_cutoff)) + 4
    k = rng.integers(1, k_top + 1, n_points) * rng.choice([-1, 1], n_points)
    k[rng.random(n_points) < 0.05] = 0
    if regime is Regime.SHORT:
        t = rng.uniform(0.0, spec.t_switch, n_points)
    else:
        t = spec.t_switch * np.exp(rng.uniform(0.0, np.log(4.0 * spec.nu ** (-1.0 / 3.0) / spec.t_switch + 1.0), n_points))
    near = rng.random(n_points) < 0.5
    eta = np.where(near, k * t + rng.normal(0.0, 4.0 * spec.K, n_points), rng.uniform(-1e3, 1e3, n_points))
    return t, k.astype(float), eta


def multiplier_audit(spec: MultiplierSpec, n_points: int = 100_000, seed: int = 0) -> List[AuditResult]:
    """Check the range, monotonicity and enhanced-dissipation inequalities of M on random points."""
    long_spec = MultiplierSpec(spec.nu, spec.K, spec.delta, spec.s, spec.l_sum, Regime.LONG)
    t, k, eta = sample_points(spec, n_points, Regime.LONG, seed)
    M, Mt, Me = M_parts(long_spec, t, k, eta)
    results = []

    lo, hi = np.pi ** 3 / 8.0, 27.0 * np.pi ** 3 / 8.0
    results.append(_summarize("M_range_long", np.minimum(M - lo, hi - M) + _SLACK * hi, t, k, eta))

    for which in (Weight.NU, Weight.I, Weight.E):
        W = eval_W(long_spec, which, t, k, eta)
        margin = np.minimum(W - np.pi / 2.0, 1.5 * np.pi - W) + _SLACK
        results.append(_summarize(f"W_{which.value}_range", margin, t, k, eta))

    nz = k != 0
    shear = k ** 2 + (eta - k * t) ** 2
    lower = (np.pi ** 2 / (4.0 * spec.K)) * k[nz] ** 2 / shear[nz]
    results.append(_summarize("dtM_lower", -Mt[nz] - lower + _SLACK * lower, t[nz], k[nz], eta[nz]))

    upper = 12.0 * np.pi ** 2 / (spec.K * np.abs(k[nz]))
    results.append(_summarize("detaM_upper", upper - np.abs(Me[nz]) + _SLACK * upper, t[nz], k[nz], eta[nz]))

    ed = (2.0 / (9.0 * spec.K * np.pi ** 2)) * spec.nu ** (1.0 / 3.0) * np.abs(k) ** (2.0 / 3.0)
    rhs = -Mt / M + spec.nu * shear
    results.append(_summarize("enhanced_dissipation", rhs - ed + _SLACK * np.maximum(ed, 1.0), t, k, eta))

    short_spec = MultiplierSpec(spec.nu, spec.K, spec.delta, spec.s, spec.l_sum, Regime.SHORT)
    ts, ks, es = sample_points(spec, n_points, Regime.SHORT, seed + 1)
    Ms = eval_M(short_spec, ts, ks, es)
    results.append(
        _summarize("M_range_short", np.minimum(Ms - np.pi / 2.0, 1.5 * np.pi - Ms) + _SLACK, ts, ks, es)
    )

    results.extend(zeta_checks(spec))
    return results


def zeta_checks(
    spec: MultiplierSpec, k_max: int = 64, times: Optional[np.ndarray] = None, n_times: int = 100
) -> List[AuditResult]:
    """Product and commutator inequalities for zeta over |k|, |l| <= k_max, in log form.

    The default time grid has ``n_times`` points on [0, 4 nu^{-1/3}].
    """
    if times is None:
        times = np.linspace(0.0, 4.0 * spec.nu ** (-1.0 / 3.0), n_times)
    rng = np.arange(-k_max, k_max + 1, dtype=float)
    T, Kk, L = np.meshgrid(times, rng, rng, indexing="ij")
    KL = Kk - L
    rate = spec.delta * spec.nu ** (1.0 / 3.0)

    def log_zeta(kk, tt=T):
        return np.where(kk != 0, rate * (np.abs(kk) ** (2.0 / 3.0) + 1.0) * tt, 0.0)

    prod = (L != 0) & (KL != 0)
    lhs = log_zeta(Kk)
    rhs = log_zeta(L) + log_zeta(KL) - rate * T
    product = _summarize("zeta_product", (rhs - lhs + _SLACK * (1.0 + np.abs(rhs)))[prod], T[prod], Kk[prod], L[prod])

    com = (Kk != 0) & (KL != 0) & (L != 0) & (T > 0)
    Tc, Kc, Lc = T[com], Kk[com], L[com]
    gap = rate * Tc * (np.abs(Kc) ** (2.0 / 3.0) - np.abs(Kc - Lc) ** (2.0 / 3.0))
    rhs_c = log_zeta(Lc, Tc) + np.log(rate * np.abs(Lc) ** (2.0 / 3.0) * Tc)
    # |k| = |k - l| gives gap 0 and an infinite margin
    with np.errstate(divide="ignore"):
        lhs_c = np.log(np.abs(np.expm1(gap)))
    margin = rhs_c - lhs_c + _SLACK * (1.0 + np.abs(rhs_c))
    commutator = _summarize("zeta_commutator", margin, Tc, Kc, Lc)
    return [product, commutator]
