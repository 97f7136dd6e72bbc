"""
Tests for shear profiles.

Validates:
- Couette gives B = 1, B' = 0 exactly
- b^{-1} inverts b; B and B' agree with their pointwise definitions
- Heat evolution: semigroup and agreement with the heat-kernel quadrature
- Monotonicity guard, CSV loading and the profile spec parser
- Assumption report on compactly supported bumps
"""

import numpy as np
import pytest

from shearlab.core.errors import InvalidInputError, ProfileDegeneracyError
from shearlab.core.grid import Grid
from shearlab.core.profile import ShearProfile, check_assumption, coefficient_drift, load_profile, support_radius


class TestConstruction:
    def test_couette_is_exactly_flat(self, small_grid):
        p = ShearProfile.couette(small_grid, 1e-3)
        B, Bp = p.coefficient_B()
        assert np.all(B == 1.0)
        assert np.all(Bp == 0.0)
        assert p.is_couette
        assert np.allclose(p.b(p.y), p.y)

    def test_non_monotone_rejected(self, small_grid):
        with pytest.raises(ProfileDegeneracyError, match="not monotone"):
            ShearProfile.tanh_bump(small_grid, 1e-3, -1.5, 1.0)

    def test_bad_width(self, small_grid):
        with pytest.raises(InvalidInputError):
            ShearProfile.tanh_bump(small_grid, 1e-3, 0.5, 0.0)

    def test_sigma0(self, bump):
        """sigma0 = min(min b', 1 / max b') = 1 / 1.5 for a 0.5 bump."""
        assert np.isclose(bump.sigma0, 1.0 / 1.5, rtol=1e-2)

    def test_from_csv_with_header(self, tmp_path, small_grid):
        y = np.linspace(-30.0, 30.0, 121)
        path = tmp_path / "steep.csv"
        np.savetxt(path, np.column_stack([y, 2.0 * y]), delimiter=",", header="y,b", comments="")
        p = ShearProfile.from_csv(path, small_grid, 1e-3)
        assert np.allclose(p.B, 2.0, atol=1e-8)

    def test_from_csv_requires_increasing_b(self, tmp_path, small_grid):
        path = tmp_path / "bad.csv"
        np.savetxt(path, np.column_stack([[0.0, 1.0, 2.0], [0.0, 1.0, 0.5]]), delimiter=",")
        with pytest.raises(ProfileDegeneracyError):
            ShearProfile.from_csv(path, small_grid, 1e-3)


class TestLoadProfile:
    def test_parses_names(self, small_grid):
        assert load_profile("couette", small_grid, 1e-3).is_couette
        p = load_profile("tanh-bump:0.3,2", small_grid, 1e-3)
        assert p.name == "tanh-bump:0.3,2"
        assert np.isclose(np.max(p.bprime_samples), 1.3, rtol=1e-2)

    @pytest.mark.parametrize("spec", ["sine", "tanh-bump:a,b"])
    def test_rejects_unknown(self, small_grid, spec):
        with pytest.raises(InvalidInputError):
            load_profile(spec, small_grid, 1e-3)


class TestCoefficients:
    def test_inverse(self, bump):
        y = np.linspace(-5.0, 5.0, 41)
        assert np.allclose(bump.b_inverse(bump.b(y)), y, atol=1e-10)

    def test_B_matches_pointwise_definition(self, bump):
        assert np.allclose(bump.B, bump.bprime(bump.y_of_v), atol=1e-12)
        assert np.allclose(bump.B_at(bump.grid.v), bump.B, atol=1e-10)

    def test_spectral_Bprime_matches_bsecond(self):
        p = ShearProfile.tanh_bump(Grid(4, 128, 8.0), 1e-3, 0.5, 1.0)
        assert np.max(np.abs(p.Bprime - p.Bprime_exact)) < 1e-4


class TestHeatEvolution:
    def test_semigroup(self, bump):
        once = bump.at(1.0)
        twice = bump.at(0.5).evolve_heat(0.5)
        assert np.allclose(once.B, twice.B, atol=1e-14)

    def test_heat_kernel_agreement(self, bump_grid):
        p = ShearProfile.tanh_bump(bump_grid, 0.1, 0.5, 1.0).at(1.0)
        assert np.max(np.abs(p.B - p.B_heat_kernel(80))) < 1e-6

    def test_bump_flattens(self, bump_grid):
        p = ShearProfile.tanh_bump(bump_grid, 0.1, 0.5, 1.0)
        assert np.max(p.at(5.0).bprime_samples) < np.max(p.bprime_samples)

    def test_negative_time(self, bump):
        with pytest.raises(InvalidInputError):
            bump.at(-1.0)


class TestAssumption:
    def test_narrow_gevrey_bump_supported(self):
        grid = Grid(4, 512, 8.0)
        report = check_assumption(ShearProfile.gevrey_bump(grid, 1e-3, 1.0, 1.5))
        assert report.monotone_ok
        assert report.support_radius <= 1.5
        assert report.support_ok

    def test_wide_gevrey_bump_fails_support(self):
        grid = Grid(4, 512, 8.0)
        p = ShearProfile.gevrey_bump(grid, 1e-3, 1.0, 4.0)
        report = check_assumption(p)
        assert support_radius(p) > 1.0 / p.sigma0
        assert not report.support_ok
        assert not report.passed
        assert report.to_dict()["passed"] is False

    def test_tolerance_bounds_bprime_away_from_zero(self):
        p = ShearProfile.tanh_bump(Grid(4, 128, 8.0), 1e-3, -0.5, 1.0)
        assert check_assumption(p).monotone_ok
        report = check_assumption(p, tolerance=0.6)
        assert report.bprime_min < 0.6
        assert not report.monotone_ok
        assert not report.passed

    def test_spectral_check_uses_its_own_tolerance(self, couette):
        report = check_assumption(couette, k_max=2, spectrum_tolerance=1e-8, tolerance=0.5)
        assert report.spectral_verdict == "continuous"
        assert report.spectral_ok


class TestCoefficientDrift:
    def test_couette_has_no_drift(self, couette):
        assert coefficient_drift(couette, 5.0) == 0.0
        assert coefficient_drift(couette, 5.0, alpha=1) == 0.0

    def test_bump_drift_grows(self, bump):
        early = coefficient_drift(bump, 10.0)
        late = coefficient_drift(bump, 100.0)
        assert 0.0 < early < late

    def test_alpha_checked(self, bump):
        with pytest.raises(InvalidInputError):
            coefficient_drift(bump, 1.0, alpha=2)
