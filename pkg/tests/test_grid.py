"""
Tests for the (z, v) grid, transforms and moving-frame symbols.

Validates:
- Grid parameter checks and wavenumber layout
- Coefficient normalization (coeffs[0, 0] is the mean, Parseval norms)
- Symbols of the tilted operators and the P_neq convention of inverse tags
- Dealiasing mask and the dense v-derivative matrix
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab.core.errors import DegenerateSymbolError, InvalidInputError
from shearlab.core.grid import (
    Grid,
    Operator,
    SpectralField,
    apply_operator,
    dealias,
    inverse_transform,
    transform,
)


class TestGrid:
    @pytest.mark.parametrize("n_z,n_v", [(15, 32), (16, 31), (0, 32)])
    def test_rejects_odd_or_empty_sizes(self, n_z, n_v):
        with pytest.raises(InvalidInputError, match="even positive"):
            Grid(n_z, n_v, 8.0)

    def test_rejects_nonpositive_box(self):
        with pytest.raises(InvalidInputError, match="L_v"):
            Grid(16, 32, 0.0)

    def test_samples_and_frequencies(self, small_grid):
        """v starts at -L_v with spacing 2 L_v / n_v; eta = pi m / L_v."""
        g = small_grid
        assert g.v[0] == -g.L_v
        assert np.allclose(np.diff(g.v), g.h)
        assert g.k[1] == 1 and g.k[-1] == -1
        assert np.isclose(g.eta[1], np.pi / g.L_v)

    def test_dealias_mask_two_thirds(self, small_grid):
        """|k| <= floor(2/3 n/2) is retained on both axes."""
        g = small_grid
        assert g.k_retained_max == 5
        assert np.isclose(g.eta_retained_max, 10 * np.pi / g.L_v)
        assert g.dealias_mask.sum() == 11 * 21

    def test_refined_doubles_v_only(self, small_grid):
        fine = small_grid.refined()
        assert fine.n_v == 64 and fine.n_z == 16 and fine.L_v == small_grid.L_v


class TestTransforms:
    def test_mean_is_zero_zero_coefficient(self, small_grid):
        f = transform(np.full(small_grid.shape, 3.0), small_grid)
        assert np.isclose(f.coeffs[0, 0], 3.0)
        assert np.allclose(f.coeffs.ravel()[1:], 0.0)

    def test_single_mode_lands_on_its_coefficients(self, small_grid):
        """cos(2 z) puts 1/2 on k = +-2, eta = 0."""
        Z, _ = np.meshgrid(small_grid.z, small_grid.v, indexing="ij")
        f = transform(np.cos(2.0 * Z), small_grid)
        assert np.isclose(f.coeffs[2, 0], 0.5)
        assert np.isclose(f.coeffs[-2, 0], 0.5)
        assert f.reality_defect() < 1e-14

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_parseval_norm(self, seed):
        """norm() equals the L2 norm of the samples on the box."""
        g = Grid(8, 16, 2.0)
        values = np.random.default_rng(seed).standard_normal(g.shape)
        f = transform(values, g)
        direct = np.sqrt(np.mean(values ** 2) * g.area)
        assert np.isclose(f.norm(), direct, rtol=1e-12)
        assert np.allclose(inverse_transform(f), values, atol=1e-12)

    def test_shape_mismatch_rejected(self, small_grid):
        with pytest.raises(InvalidInputError, match="does not match"):
            SpectralField(small_grid, np.zeros((4, 4)))
        with pytest.raises(InvalidInputError):
            transform(np.zeros((4, 4)), small_grid)

    def test_projections_split_the_field(self, small_grid):
        rng = np.random.default_rng(3)
        f = transform(rng.standard_normal(small_grid.shape), small_grid)
        assert np.allclose(f.p0().coeffs + f.pneq().coeffs, f.coeffs)
        assert np.all(f.pneq().coeffs[0] == 0)


class TestSymbols:
    def test_tilt_symbol(self, small_grid):
        K, E = small_grid.mesh
        assert np.allclose(small_grid.symbol(Operator.TILT, 1.5), 1j * (E - 1.5 * K))

    def test_inverse_laplacian_on_nonzero_modes(self, small_grid):
        t = 0.7
        lap = small_grid.symbol("lap", t)
        inv = small_grid.symbol("inv_lap", t)
        nonzero = small_grid.mesh[0] != 0
        assert np.allclose((lap * inv)[nonzero], 1.0)
        assert np.all(inv[~nonzero] == 0)

    def test_half_powers_compose(self, small_grid):
        half = small_grid.symbol(Operator.HALF, 2.0)
        inv_half = small_grid.symbol(Operator.INV_HALF, 2.0)
        nonzero = small_grid.mesh[0] != 0
        assert np.allclose((half * inv_half)[nonzero], 1.0)

    def test_strict_inverse_rejects_zero_mode_content(self, small_grid):
        f = SpectralField.zeros(small_grid)
        f.coeffs[0, 1] = 1.0
        with pytest.raises(DegenerateSymbolError):
            apply_operator(f, Operator.INV_LAPLACE, strict=True)
        assert np.all(apply_operator(f, Operator.INV_LAPLACE).coeffs == 0)

    def test_unknown_tag(self, small_grid):
        with pytest.raises(ValueError):
            small_grid.symbol("curl")

    def test_dealias_zeroes_high_modes(self, small_grid):
        f = SpectralField(small_grid, np.ones(small_grid.shape))
        out = dealias(f)
        assert np.all(out.coeffs[~small_grid.dealias_mask] == 0)
        assert np.all(out.coeffs[small_grid.dealias_mask] == 1)

    def test_derivative_matrix_differentiates(self):
        g = Grid(2, 64, np.pi)
        D = g.derivative_matrix
        assert np.allclose(D @ np.sin(3.0 * g.v), 3.0 * np.cos(3.0 * g.v), atol=1e-10)

    def test_bracket_tilt(self, small_grid):
        K, E = small_grid.mesh
        assert np.allclose(small_grid.bracket(2.0, 1.0, tilt=True), 1.0 + K ** 2 + (E - K) ** 2)
