"""Grid model: lattice alignment, cell areas, counting, windows."""

import math

import numpy as np
import pytest

from settlematch import AlignmentError, BinaryRaster, GridSpec, cell_area_km2, count_settled, window
from settlematch.grid import EARTH_RADIUS_M, row_areas_km2
from settlematch.synth import oracle_count, random_raster


def equator_spec(width=8, height=8, resolution=3.0):
    per_deg = 3600.0 / resolution
    return GridSpec.from_lattice(int(180 * per_deg), int(90 * per_deg),
                                 resolution, width, height)


class TestGridSpec:
    def test_lattice_anchoring(self):
        spec = GridSpec.from_lattice(228000, 108000, 3.0, 10, 10)
        assert spec.origin_lon == pytest.approx(10.0)
        assert spec.origin_lat == pytest.approx(0.0)
        assert spec.col0 == 228000
        assert spec.row0 == 108000

    def test_off_lattice_origin_rejected(self):
        res = 3.0 / 3600.0
        with pytest.raises(AlignmentError):
            GridSpec(10.0 + 0.5 * res, 0.0, 3.0, 4, 4)

    def test_invalid_shape_rejected(self):
        with pytest.raises(ValueError):
            GridSpec.from_lattice(0, 0, 3.0, 0, 4)
        with pytest.raises(ValueError):
            GridSpec.from_lattice(0, 0, -3.0, 4, 4)

    def test_out_of_range_latitude_rejected(self):
        # a grid starting at the south pole has no room to extend further
        with pytest.raises(ValueError):
            GridSpec.from_lattice(0, 216000, 3.0, 4, 4)

    def test_from_bounds_covers_box(self):
        eps = 1e-9  # lattice arithmetic tolerance
        spec = GridSpec.from_bounds(10.001, -0.01, 10.01, -0.001, 3.0)
        assert spec.origin_lon <= 10.001 + eps
        assert spec.lon_east >= 10.01 - eps
        assert spec.origin_lat >= -0.001 - eps
        assert spec.lat_south <= -0.01 + eps

    def test_matching_tiles_share_ground_footprint(self):
        # equal-resolution grids agree on cell centers wherever global
        # tile indices coincide
        a = GridSpec.from_lattice(228000, 108000, 3.0, 12, 12)
        b = a.translate(3, 5)
        for row in range(3):
            for col in range(3):
                lon_a, lat_a = a.cell_center(row + 3, col + 5)
                lon_b, lat_b = b.cell_center(row, col)
                assert abs(lon_a - lon_b) < 1e-9
                assert abs(lat_a - lat_b) < 1e-9


class TestCellArea:
    def test_equatorial_area_matches_formula(self):
        spec = equator_spec()
        delta = math.radians(3.0 / 3600.0)
        expected = (EARTH_RADIUS_M * delta) ** 2 / 1e6
        # row 0 sits just south of the equator, half a cell down
        phi = math.radians(-0.5 * 3.0 / 3600.0)
        assert cell_area_km2(spec, 0) == pytest.approx(expected * math.cos(phi), rel=1e-12)
        assert cell_area_km2(spec, 0) == pytest.approx(0.0085875, rel=1e-3)

    def test_cosine_scaling_at_60_degrees(self):
        res = 3.0
        per_deg = 3600.0 / res
        eq = GridSpec.from_lattice(0, int(90 * per_deg), res, 4, 4)
        sixty = GridSpec.from_lattice(0, int(30 * per_deg), res, 4, 4)
        # compare rows whose centers sit symmetric around the nominal latitudes
        a_eq = cell_area_km2(eq, 0) / math.cos(math.radians(eq.origin_lat - 0.5 * res / 3600))
        a_60 = cell_area_km2(sixty, 0) / math.cos(math.radians(sixty.origin_lat - 0.5 * res / 3600))
        assert a_eq == pytest.approx(a_60, rel=1e-12)
        assert cell_area_km2(sixty, 0) / cell_area_km2(eq, 0) == pytest.approx(
            math.cos(math.radians(60 - 0.5 * res / 3600))
            / math.cos(math.radians(-0.5 * res / 3600)), rel=1e-12)

    def test_doubling_resolution_quadruples_area(self):
        a3 = cell_area_km2(equator_spec(resolution=3.0), 0)
        a6 = cell_area_km2(equator_spec(resolution=6.0), 0)
        # same row index means slightly different center latitude; compare
        # through the cosine-corrected quotient
        ratio = a6 / a3
        cos_corr = math.cos(math.radians(-3.0 / 3600)) / math.cos(math.radians(-1.5 / 3600))
        assert ratio == pytest.approx(4.0 * cos_corr, rel=1e-12)

    def test_row_out_of_range(self):
        with pytest.raises(IndexError):
            cell_area_km2(equator_spec(height=4), 4)

    @pytest.mark.parametrize("lat_top_deg", [10, 60, -30])
    def test_band_sum_matches_spherical_zone(self, lat_top_deg):
        # full-globe band of rows vs the analytic zone area
        res = 3.0
        per_deg = int(3600 / res)
        rows = 120  # 0.1 degree band
        spec = GridSpec.from_lattice(0, (90 - lat_top_deg) * per_deg, res, 1, rows)
        band = float(row_areas_km2(spec).sum()) * 360 * per_deg
        lat_bot = lat_top_deg - rows * res / 3600.0
        zone = (2 * math.pi * EARTH_RADIUS_M ** 2
                * (math.sin(math.radians(lat_top_deg)) - math.sin(math.radians(lat_bot))) / 1e6)
        assert band == pytest.approx(zone, rel=5e-3)


class TestCountSettled:
    def test_empty_and_full(self):
        spec = equator_spec(4, 4)
        assert count_settled(BinaryRaster.zeros(spec)) == 0
        assert count_settled(BinaryRaster.from_bool(spec, np.ones((4, 4), bool))) == 16

    def test_matches_loop_oracle_on_seeded_rasters(self):
        spec = equator_spec(8, 8)
        for seed in range(25):
            r = random_raster(seed, spec, density=0.4)
            assert count_settled(r) == oracle_count(r.to_bool())

    def test_popcount_invariant_after_packing(self):
        spec = equator_spec(13, 7)  # width not a multiple of 8
        cells = np.zeros((7, 13), bool)
        cells[::2, ::3] = True
        r = BinaryRaster.from_bool(spec, cells)
        assert count_settled(r) == int(cells.sum())


class TestWindow:
    def test_identity_window(self):
        spec = equator_spec(6, 5)
        r = random_raster(3, spec, density=0.5)
        assert window(r, r.spec) == r

    def test_corner_window_matches_loop_extraction(self):
        spec = equator_spec(4, 4)
        r = random_raster(9, spec, density=0.5)
        sub = GridSpec.from_lattice(spec.col0 + 2, spec.row0 + 2, 3.0, 2, 2)
        got = window(r, sub).to_bool()
        cells = r.to_bool()
        for i in range(2):
            for j in range(2):
                assert got[i, j] == cells[2 + i, 2 + j]

    def test_half_cell_offset_is_unrepresentable(self):
        spec = equator_spec(4, 4)
        res = spec.res_deg
        with pytest.raises(AlignmentError):
            GridSpec(spec.origin_lon + 0.5 * res, spec.origin_lat, 3.0, 2, 2)

    def test_resolution_mismatch_and_out_of_bounds(self):
        spec = equator_spec(4, 4)
        r = random_raster(5, spec)
        with pytest.raises(AlignmentError):
            window(r, GridSpec.from_lattice(spec.col0 // 2, spec.row0 // 2, 6.0, 2, 2))
        with pytest.raises(AlignmentError):
            window(r, GridSpec.from_lattice(spec.col0 + 3, spec.row0, 3.0, 2, 2))
