import math

import numpy as np
import pytest

from mplc_usd.errors import InvalidArgument, ResolutionWarning
from mplc_usd.optics import (
    Field,
    ModeBasis,
    gaussian_spot,
    gram_matrix,
    hermite_gaussian,
    hg_basis,
    hg_family,
    inner_product,
    load_field,
    make_grid,
    save_field,
    spot_layout,
    superpose,
)


class TestGrid:
    def test_coordinates_are_centered(self, grid):
        assert grid.x[grid.nx // 2] == 0.0
        assert np.allclose(np.diff(grid.x), grid.pitch)
        assert grid.shape == (128, 128)
        assert grid.extent == pytest.approx((128 * 8e-6, 128 * 8e-6))

    @pytest.mark.parametrize(
        "args",
        [(0, 64, 1e-6, 1e-6), (63, 64, 1e-6, 1e-6), (64, 64, 0.0, 1e-6), (64, 64, 1e-6, -1.0)],
    )
    def test_rejects_bad_parameters(self, args):
        with pytest.raises(InvalidArgument):
            make_grid(*args)

    def test_grids_compare_by_value(self):
        assert make_grid(32, 32, 1e-6, 5e-7) == make_grid(32, 32, 1e-6, 5e-7)


class TestField:
    def test_shape_is_checked(self, grid):
        with pytest.raises(InvalidArgument):
            Field(grid, np.zeros((3, 3)))

    def test_amplitude_is_read_only(self, grid):
        f = Field(grid, np.ones(grid.shape))
        with pytest.raises(ValueError):
            f.amplitude[0, 0] = 2

    def test_normalized_has_unit_power(self, grid, rng):
        f = Field(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
        assert f.normalized().power() == pytest.approx(1.0, abs=1e-12)

    def test_zero_field_cannot_be_normalized(self, grid):
        with pytest.raises(InvalidArgument):
            Field(grid, np.zeros(grid.shape)).normalized()

    def test_arithmetic(self, grid):
        f = hermite_gaussian(grid, 0, 0, 60e-6)
        assert ((f + f) - f * 2.0).power() == pytest.approx(0.0, abs=1e-24)
        assert inner_product(-f, f) == pytest.approx(-1.0)


class TestHermiteGaussian:
    def test_hg00_is_gaussian(self, grid):
        w = 60e-6
        f = hermite_gaussian(grid, 0, 0, w)
        X, Y = grid.mesh()
        ref = np.exp(-(X**2 + Y**2) / w**2)
        ref /= np.sqrt(np.sum(ref**2) * grid.pitch**2)
        assert np.allclose(f.amplitude, ref, atol=1e-10)

    def test_family_is_orthonormal(self):
        g = make_grid(256, 256, 8e-6, 633e-9)
        fields = [hermite_gaussian(g, m, n, 80e-6) for m in range(7) for n in range(7 - m)]
        G = gram_matrix(fields)
        assert np.max(np.abs(G - np.eye(len(fields)))) < 1e-4

    def test_sign_convention_positive_lobe(self, grid):
        f = hermite_gaussian(grid, 1, 0, 60e-6)
        row = f.amplitude[grid.ny // 2]
        assert row[grid.nx // 2 + 8] > 0 > row[grid.nx // 2 - 8]

    def test_undersampled_waist_warns(self, grid):
        with pytest.warns(ResolutionWarning):
            hermite_gaussian(grid, 0, 0, 2 * grid.pitch)

    def test_strict_mode_raises(self, grid):
        with pytest.raises(InvalidArgument):
            hermite_gaussian(grid, 0, 0, 2 * grid.pitch, strict=True)

    def test_oversized_waist_warns(self, grid):
        with pytest.warns(ResolutionWarning):
            hermite_gaussian(grid, 0, 0, grid.extent[0] / 3)

    def test_negative_index_rejected(self, grid):
        with pytest.raises(InvalidArgument):
            hermite_gaussian(grid, -1, 0, 60e-6)


class TestSpots:
    def test_centered_spot_equals_hg00(self, grid):
        a = gaussian_spot(grid, 50e-6, (0.0, 0.0))
        b = hermite_gaussian(grid, 0, 0, 50e-6)
        assert np.allclose(a.amplitude, b.amplitude)

    def test_spots_six_waists_apart_are_orthogonal(self, grid):
        w = 40e-6
        a = gaussian_spot(grid, w, (-3 * w, 0.0))
        b = gaussian_spot(grid, w, (3 * w, 0.0))
        assert abs(inner_product(a, b)) ** 2 < 1e-6

    def test_overlap_matches_analytic(self, grid):
        w, s = 40e-6, 48e-6
        a = gaussian_spot(grid, w, (0.0, 0.0))
        b = gaussian_spot(grid, w, (s, 0.0))
        assert abs(inner_product(a, b)) == pytest.approx(math.exp(-(s**2) / (2 * w**2)), rel=1e-6)

    def test_center_outside_grid(self, grid):
        with pytest.raises(InvalidArgument):
            gaussian_spot(grid, 40e-6, (grid.extent[0], 0.0))

    def test_layout_geometry(self):
        pts = spot_layout(4, 1.0)
        assert pts[0] == pytest.approx((0.0, 1.0), abs=1e-15)
        assert pts[1] == pytest.approx((-1.0, 0.0), abs=1e-15)
        assert all(math.hypot(*p) == pytest.approx(1.0) for p in pts)


class TestBasis:
    def test_family_order(self):
        assert hg_family(3) == [(0, 3), (1, 2), (2, 1), (3, 0)]

    def test_superpose_and_project_roundtrip(self, grid, rng):
        basis = hg_basis(grid, 3, 60e-6)
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        f = superpose(c, basis)
        assert np.allclose(basis.project(f), c, atol=1e-6)

    def test_basis_labels_and_check(self, grid):
        basis = hg_basis(grid, 2, 60e-6)
        assert basis.labels == ((0, 2), (1, 1), (2, 0))
        basis.check_orthonormal()

    def test_non_orthonormal_basis_detected(self, grid):
        f = hermite_gaussian(grid, 0, 0, 60e-6)
        with pytest.raises(InvalidArgument):
            ModeBasis((f, f)).check_orthonormal()

    def test_wrong_coefficient_count(self, grid):
        with pytest.raises(InvalidArgument):
            superpose([1, 0], hg_basis(grid, 2, 60e-6))


def test_field_roundtrip(tmp_path, grid, rng):
    f = Field(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
    save_field(f, tmp_path / "f")
    g = load_field(tmp_path / "f")
    assert g.grid == grid
    assert np.array_equal(g.amplitude, f.amplitude)
