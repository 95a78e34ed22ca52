"""Per-region overlap, the HDI join, and the association statistic."""

import numpy as np
import pytest

from settlematch import (
    BinaryRaster,
    ComputationError,
    FormatError,
    average_overlap,
    count_settled,
    hdi_association,
    join_hdi,
    window,
    zonal_overlap,
)
from settlematch.geio.vector import HdiTable
from settlematch.grid import GridSpec
from settlematch.synth import random_raster
from settlematch.zonal import ZonalRow, ZonalTable
from tests.test_harmonize import spec_at, strip_region


def halves(spec):
    mid = spec.width // 2
    return [strip_region(spec, 0, mid, region_id="L"),
            strip_region(spec, mid, spec.width, region_id="R")]


class TestZonalOverlap:
    def test_single_all_covering_region_equals_national(self):
        spec = spec_at(16, 16)
        rs = [random_raster(s, spec, density=0.3, ensure_nonempty=True) for s in (1, 2, 3)]
        table = zonal_overlap(rs, ["a", "b", "c"], [strip_region(spec, 0, 16)])
        assert len(table.rows) == 1
        assert table.rows[0].average_theta == pytest.approx(average_overlap(rs), rel=1e-15)
        assert table.rows[0].counts == {n: r.count for n, r in zip(["a", "b", "c"], rs)}

    def test_half_plane_regions_match_windowed_recomputation(self):
        spec = spec_at(16, 16)
        rs = [random_raster(s + 10, spec, density=0.35, ensure_nonempty=True)
              for s in range(2)]
        table = zonal_overlap(rs, ["a", "b"], halves(spec))
        left_spec = GridSpec.from_lattice(spec.col0, spec.row0, 3.0, 8, 16)
        right_spec = GridSpec.from_lattice(spec.col0 + 8, spec.row0, 3.0, 8, 16)
        for row, sub in zip(table.rows, [left_spec, right_spec]):
            windowed = [window(r, sub) for r in rs]
            assert row.average_theta == pytest.approx(average_overlap(windowed), rel=1e-15)
            assert row.counts["a"] == windowed[0].count

    def test_region_empty_in_all_rasters_has_missing_theta(self):
        spec = spec_at(8, 8)
        cells = np.zeros((8, 8), bool)
        cells[:, :4] = True  # everything lives in the left half
        r = BinaryRaster.from_bool(spec, cells)
        table = zonal_overlap([r, r], ["a", "b"], halves(spec))
        by_id = {row.region_id: row for row in table.rows}
        assert by_id["R"].average_theta is None
        assert by_id["R"].counts == {"a": 0, "b": 0}
        assert by_id["L"].average_theta == 1.0

    def test_region_outside_grid_flagged_not_fatal(self):
        spec = spec_at(8, 8)
        res = spec.res_deg
        far = strip_region(spec, 0, 8, region_id="FAR")
        # shift the polygon fully east of the grid
        moved = [[[(x + 10 * 8 * res, y) for x, y in ring] for ring in poly]
                 for poly in far.polygons]
        far = type(far)(far.country_code, "FAR", "far", moved)
        rs = [random_raster(s, spec, ensure_nonempty=True) for s in (4, 5)]
        table = zonal_overlap(rs, ["a", "b"], [strip_region(spec, 0, 8), far])
        by_id = {row.region_id: row for row in table.rows}
        assert by_id["FAR"].outside_grid
        assert by_id["FAR"].average_theta is None

    def test_partition_conservation(self):
        spec = spec_at(16, 16)
        rs = [random_raster(s + 30, spec, density=0.4) for s in range(2)]
        regions = halves(spec)
        table = zonal_overlap(rs, ["a", "b"], regions)
        for k, name in enumerate(["a", "b"]):
            from_regions = sum(row.counts[name] for row in table.rows)
            assert from_regions + table.out_of_region_cells[name] == count_settled(rs[k])

    def test_overlapping_regions_first_listed_wins(self):
        spec = spec_at(8, 8)
        cells = np.ones((8, 8), bool)
        r = BinaryRaster.from_bool(spec, cells)
        overlapping = [strip_region(spec, 0, 6, region_id="A"),
                       strip_region(spec, 2, 8, region_id="B")]
        table = zonal_overlap([r, r], ["x", "y"], overlapping)
        by_id = {row.region_id: row for row in table.rows}
        assert by_id["A"].counts["x"] == 48  # columns 0..5, all 8 rows
        assert by_id["B"].counts["x"] == 16  # only the non-contested columns 6..7

    def test_row_order_fixed_by_country_and_region(self):
        spec = spec_at(8, 8)
        rs = [random_raster(s, spec, ensure_nonempty=True) for s in (7, 8)]
        regions = [strip_region(spec, 4, 8, region_id="Z2"),
                   strip_region(spec, 0, 4, region_id="A1")]
        table = zonal_overlap(rs, ["a", "b"], regions)
        assert [row.region_id for row in table.rows] == ["A1", "Z2"]


class TestJoinHdi:
    def _table(self, region_ids):
        rows = [ZonalRow("TST", rid, rid, 1.0, 0.5, {("a", "b"): 0.5},
                         {"a": 1, "b": 1}) for rid in region_ids]
        return ZonalTable(["a", "b"], rows)

    def test_full_match(self):
        table = join_hdi(self._table(["R1", "R2"]), HdiTable({"R1": 0.5, "R2": 0.7}))
        assert [row.hdi for row in table.rows] == [0.5, 0.7]
        assert table.unmatched_hdi_rows == 0

    def test_left_join_keeps_unmatched_missing(self):
        table = join_hdi(self._table(["R1", "R2"]), HdiTable({"R1": 0.5}))
        assert table.rows[1].hdi is None
        assert table.unmatched_hdi_rows == 1

    def test_empty_hdi_table(self):
        table = join_hdi(self._table(["R1", "R2"]), HdiTable({}))
        assert all(row.hdi is None for row in table.rows)
        assert table.unmatched_hdi_rows == 2

    def test_duplicate_region_id_rejected_at_read(self, tmp_path):
        # duplicates are rejected when the HDI table is built, before any join
        from settlematch.geio import read_hdi_csv

        path = tmp_path / "h.csv"
        path.write_text("region_id,hdi\r\nR1,0.4\r\nR1,0.5\r\n")
        with pytest.raises(FormatError):
            read_hdi_csv(path)


class TestHdiAssociation:
    def _table(self, pairs):
        rows = [ZonalRow("TST", f"R{i}", f"R{i}", 1.0, theta, {}, {}, hdi=hdi)
                for i, (hdi, theta) in enumerate(pairs)]
        return ZonalTable(["a", "b"], rows)

    def test_identical_series_r_one(self):
        table = self._table([(0.2, 0.2), (0.5, 0.5), (0.8, 0.8)])
        r, _ = hdi_association(table)
        assert r == pytest.approx(1.0)

    def test_known_values_match_direct_formula(self):
        pairs = [(0.3, 0.2), (0.5, 0.45), (0.7, 0.5), (0.9, 0.8)]
        hdis = np.array([p[0] for p in pairs])
        thetas = np.array([p[1] for p in pairs])
        dx = hdis - hdis.mean()
        dy = thetas - thetas.mean()
        want = float((dx * dy).sum() / np.sqrt((dx * dx).sum() * (dy * dy).sum()))
        r, _ = hdi_association(self._table(pairs))
        assert r == pytest.approx(want, rel=1e-12)

    def test_missing_rows_excluded(self):
        pairs = [(0.3, 0.2), (0.5, 0.45), (0.7, 0.5)]
        table = self._table(pairs)
        extra = ZonalRow("TST", "X", "X", 1.0, None, {}, {}, hdi=0.9)
        table = ZonalTable(table.dataset_names, table.rows + [extra])
        r, _ = hdi_association(table)
        r_ref, _ = hdi_association(self._table(pairs))
        assert r == r_ref

    def test_constant_theta_rejected(self):
        with pytest.raises(ComputationError):
            hdi_association(self._table([(0.3, 0.5), (0.5, 0.5), (0.7, 0.5)]))

    def test_fewer_than_three_rejected(self):
        with pytest.raises(ComputationError):
            hdi_association(self._table([(0.3, 0.2), (0.5, 0.4)]))


class TestZonalCsv:
    def test_missing_theta_serialized_empty_never_zero(self, tmp_path):
        from settlematch.geio import write_report

        spec = spec_at(8, 8)
        cells = np.zeros((8, 8), bool)
        cells[:, :4] = True
        r = BinaryRaster.from_bool(spec, cells)
        table = zonal_overlap([r, r], ["a", "b"], halves(spec))
        write_report(table, tmp_path / "z.csv", "csv")
        lines = (tmp_path / "z.csv").read_text().splitlines()
        header = lines[0].split(",")
        i_theta = header.index("theta_avg")
        by_region = {line.split(",")[1]: line.split(",") for line in lines[1:]}
        assert by_region["R"][i_theta] == ""
        assert by_region["L"][i_theta] == "1"
