"""Per-region overlap statistics and the development-index association.

Cells are assigned to regions by the center rule, consistent with country
masking, so every cell belongs to at most one region; when region
polygons overlap, the first listed region wins and a warning is logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .agreement import jaccard, pearson
from .errors import ComputationError
from .geio.vector import AdminRegion, HdiTable
from .grid import BinaryRaster, GridSpec, row_areas_km2
from .rasterize import fill_center_mask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZonalRow:
    country_code: str
    region_id: str
    region_name: str
    area_km2: float
    average_theta: float | None  # None when every dataset is empty here
    pairwise_theta: dict[tuple[str, str], float]
    counts: dict[str, int]
    hdi: float | None = None
    outside_grid: bool = False


@dataclass(frozen=True)
class ZonalTable:
    """One row per admin region, sorted by (country_code, region_id)."""

    dataset_names: list[str]
    rows: list[ZonalRow]
    unmatched_hdi_rows: int = 0
    out_of_region_cells: dict[str, int] = field(default_factory=dict)

    def csv_header(self) -> list[str]:
        pairs = list(combinations(self.dataset_names, 2))
        return (["country_code", "region_id", "region_name", "area_km2",
                 "n_datasets", "theta_avg"]
                + [f"theta_{a}_{b}" for a, b in pairs]
                + [f"count_{n}" for n in self.dataset_names]
                + ["hdi"])

    def csv_rows(self) -> list[list]:
        pairs = list(combinations(self.dataset_names, 2))
        out = []
        for r in self.rows:
            out.append([r.country_code, r.region_id, r.region_name, r.area_km2,
                        len(self.dataset_names), r.average_theta]
                       + [r.pairwise_theta.get(p) for p in pairs]
                       + [r.counts.get(n, 0) for n in self.dataset_names]
                       + [r.hdi])
        return out

    def as_dict(self) -> dict:
        return {
            "datasets": list(self.dataset_names),
            "unmatched_hdi_rows": self.unmatched_hdi_rows,
            "regions": [
                {
                    "country_code": r.country_code,
                    "region_id": r.region_id,
                    "region_name": r.region_name,
                    "area_km2": r.area_km2,
                    "theta_avg": r.average_theta,
                    "theta": {f"{a}|{b}": v for (a, b), v in r.pairwise_theta.items()},
                    "counts": dict(r.counts),
                    "hdi": r.hdi,
                }
                for r in self.rows
            ],
        }


def _region_ownership(regions: list[AdminRegion], spec: GridSpec) -> np.ndarray:
    """Index of the owning region per cell (-1 outside all regions)."""
    owner = np.full((spec.height, spec.width), -1, dtype=np.int32)
    for i, region in enumerate(regions):
        inside = fill_center_mask(region.polygons, spec)
        clash = inside & (owner != -1)
        if clash.any():
            log.warning("region %s overlaps an earlier region on %d cells; "
                        "first listed wins", region.region_id, int(clash.sum()))
            inside &= ~clash
        owner[inside] = i
    return owner


def zonal_overlap(rasters: list[BinaryRaster], names: list[str],
                  regions: list[AdminRegion]) -> ZonalTable:
    """Overlap and counts per admin region.

    Regions where every dataset is empty keep average_theta as missing
    (never 0, which would mean measured total disagreement); regions
    whose polygons fall outside the grid are flagged, not fatal.
    """
    if len(rasters) < 2:
        raise ComputationError(f"need at least 2 rasters, got {len(rasters)}")
    spec = rasters[0].spec
    for r in rasters[1:]:
        if not r.spec.matches(spec):
            raise ComputationError("rasters are on different grids")
    owner = _region_ownership(regions, spec)
    areas = row_areas_km2(spec)
    bools = {n: r.to_bool() for n, r in zip(names, rasters)}

    rows = []
    for i, region in enumerate(regions):
        inside = owner == i
        if not inside.any():
            rows.append(ZonalRow(region.country_code, region.region_id, region.name,
                                 0.0, None, {}, {n: 0 for n in names},
                                 outside_grid=True))
            log.warning("region %s covers no grid cell", region.region_id)
            continue
        area = float((inside.sum(axis=1) * areas).sum())
        masked = {n: BinaryRaster.from_bool(spec, b & inside) for n, b in bools.items()}
        counts = {n: masked[n].count for n in names}
        if all(c == 0 for c in counts.values()):
            rows.append(ZonalRow(region.country_code, region.region_id, region.name,
                                 area, None, {}, counts))
            continue
        pairwise = {(a, b): jaccard(masked[a], masked[b])
                    for a, b in combinations(names, 2)}
        avg = sum(pairwise.values()) / len(pairwise)
        rows.append(ZonalRow(region.country_code, region.region_id, region.name,
                             area, avg, pairwise, counts))

    rows.sort(key=lambda r: (r.country_code, r.region_id))
    remainder = owner == -1
    out_counts = {n: int((bools[n] & remainder).sum()) for n in names}
    return ZonalTable(list(names), rows, out_of_region_cells=out_counts)


def join_hdi(table: ZonalTable, hdi: HdiTable) -> ZonalTable:
    """Left-join development-index values onto the zonal table by region id."""
    unmatched = 0
    rows = []
    for row in table.rows:
        value = hdi.values.get(row.region_id)
        if value is None:
            unmatched += 1
        rows.append(replace(row, hdi=value))
    return ZonalTable(table.dataset_names, rows, unmatched_hdi_rows=unmatched,
                      out_of_region_cells=table.out_of_region_cells)


def hdi_association(table: ZonalTable) -> tuple[float, float]:
    """Pearson correlation between region HDI and region average overlap."""
    pairs = [(r.hdi, r.average_theta) for r in table.rows
             if r.hdi is not None and r.average_theta is not None]
    if len(pairs) < 3:
        raise ComputationError(f"need at least 3 regions with both HDI and overlap, "
                               f"got {len(pairs)}")
    hdis, thetas = zip(*pairs)
    return pearson(hdis, thetas)
