"""Convert footprint and extent polygons to binary rasters.

Two conversion policies exist. Building footprints default to centroid
mode (one building, one cell at the 100 m scale); settlement extents use
coverage semantics: a cell is settled when its center lies inside the
polygon (even-odd rule, holes respected) or the polygon boundary crosses
the cell rectangle. Interior filling is scanline-based with per-row
crossing lists, boundary cells come from walking each edge across the
grid lines it crosses.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from math import ceil, floor
from typing import Iterable

import numpy as np

from .geometry import Polygon, polygon_bbox, polygon_centroid, ring_self_intersects
from .geio.vector import ExtentRecord, FootprintRecord
from .grid import BinaryRaster, GridSpec

log = logging.getLogger(__name__)


class RasterizePolicy(enum.Enum):
    CENTROID = "centroid"
    ANY_INTERSECTION = "any-intersection"


@dataclass
class RasterizeStats:
    """Diagnostics accumulated while rasterizing a record stream."""

    records: int = 0
    out_of_grid_cells: int = 0
    out_of_grid_polygons: int = 0
    degenerate_polygons: int = 0
    self_intersecting_rings: int = 0


def _fill_centers(rings: Polygon, spec: GridSpec, out: np.ndarray) -> int:
    """Set cells whose center is inside the rings (even-odd); returns drops.

    Crossings use the half-open vertex rule (an edge owns its southern
    endpoint's row) so shared vertices are counted exactly once.
    """
    res = spec.res_deg
    lat0 = spec.origin_lat
    lon0 = spec.origin_lon
    height, width = out.shape
    crossings: dict[int, list[float]] = {}
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            if y1 == y2:
                continue
            ylo, yhi = (y1, y2) if y1 < y2 else (y2, y1)
            # rows whose center latitude falls in [ylo, yhi)
            t_hi = (lat0 - yhi) / res - 0.5
            t_lo = (lat0 - ylo) / res - 0.5
            r_start = floor(t_hi) + 1
            r_end = floor(t_lo)
            if r_end < r_start:
                continue
            slope = (x2 - x1) / (y2 - y1)
            for r in range(r_start, r_end + 1):
                yc = lat0 - (r + 0.5) * res
                crossings.setdefault(r, []).append(x1 + (yc - y1) * slope)
    dropped = 0
    for r, xs in crossings.items():
        xs.sort()
        in_grid_row = 0 <= r < height
        for a, b in zip(xs[0::2], xs[1::2]):
            j_start = ceil((a - lon0) / res - 0.5)
            j_end = ceil((b - lon0) / res - 0.5) - 1
            if j_end < j_start:
                continue
            if not in_grid_row:
                dropped += j_end - j_start + 1
                continue
            lo = max(j_start, 0)
            hi = min(j_end, width - 1)
            dropped += (j_end - j_start + 1) - max(hi - lo + 1, 0)
            if lo <= hi:
                out[r, lo:hi + 1] = True
    return dropped


_ON_LINE_TOL = 1e-9


def _mark_boundary(rings: Polygon, spec: GridSpec, out: np.ndarray,
                   outside: set | None = None) -> None:
    """Set every cell whose interior a ring edge passes through.

    Each segment is cut at the grid lines it crosses; the midpoint of each
    piece identifies the cell containing that piece. A piece running along
    a grid line touches only cell borders, so it marks nothing: a polygon
    whose edges coincide with cell edges covers exactly the cells inside.
    """
    res = spec.res_deg
    height, width = out.shape
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            u1 = (x1 - spec.origin_lon) / res
            v1 = (spec.origin_lat - y1) / res
            u2 = (x2 - spec.origin_lon) / res
            v2 = (spec.origin_lat - y2) / res
            ts = [0.0, 1.0]
            du = u2 - u1
            dv = v2 - v1
            if du != 0.0:
                for g in range(ceil(min(u1, u2)), floor(max(u1, u2)) + 1):
                    t = (g - u1) / du
                    if 0.0 < t < 1.0:
                        ts.append(t)
            if dv != 0.0:
                for g in range(ceil(min(v1, v2)), floor(max(v1, v2)) + 1):
                    t = (g - v1) / dv
                    if 0.0 < t < 1.0:
                        ts.append(t)
            ts.sort()
            for ta, tb in zip(ts, ts[1:]):
                tm = 0.5 * (ta + tb)
                um = u1 + tm * du
                vm = v1 + tm * dv
                if abs(um - round(um)) < _ON_LINE_TOL or abs(vm - round(vm)) < _ON_LINE_TOL:
                    continue  # piece lies on a grid line, a border touch only
                c = floor(um)
                r = floor(vm)
                if 0 <= r < height and 0 <= c < width:
                    out[r, c] = True
                elif outside is not None:
                    outside.add((r, c))


def _bbox_touches(rings: Polygon, spec: GridSpec) -> bool:
    lon_min, lat_min, lon_max, lat_max = polygon_bbox(rings)
    return not (lon_max < spec.origin_lon or lon_min > spec.lon_east
                or lat_max < spec.lat_south or lat_min > spec.origin_lat)


def _coverage(rings: Polygon, spec: GridSpec, out: np.ndarray, stats: RasterizeStats) -> None:
    if not _bbox_touches(rings, spec):
        stats.out_of_grid_polygons += 1
        return
    outside: set = set()
    stats.out_of_grid_cells += _fill_centers(rings, spec, out)
    _mark_boundary(rings, spec, out, outside)
    stats.out_of_grid_cells += len(outside)


def rasterize_footprints(records: Iterable[FootprintRecord], spec: GridSpec,
                         policy: RasterizePolicy = RasterizePolicy.CENTROID,
                         stats: RasterizeStats | None = None) -> BinaryRaster:
    """Rasterize building footprints onto the grid.

    Centroid mode sets the single cell containing each polygon's area
    centroid (zero-area polygons fall back to their first vertex and are
    counted as degenerate); any-intersection mode sets every cell whose
    rectangle the polygon touches. Geometry outside the grid is dropped
    and counted, never an error.
    """
    if spec.resolution < 1.0:
        raise ValueError(f"target resolution {spec.resolution} arc-seconds is below "
                         "the supported 1 arc-second minimum")
    stats = stats if stats is not None else RasterizeStats()
    out = np.zeros((spec.height, spec.width), dtype=bool)
    res = spec.res_deg
    for rec in records:
        stats.records += 1
        rings = rec.polygon
        if policy is RasterizePolicy.CENTROID:
            c = polygon_centroid(rings)
            if c is None:
                stats.degenerate_polygons += 1
                c = rings[0][0]
            col = floor((c[0] - spec.origin_lon) / res)
            row = floor((spec.origin_lat - c[1]) / res)
            if 0 <= row < spec.height and 0 <= col < spec.width:
                out[row, col] = True
            else:
                stats.out_of_grid_cells += 1
        else:
            _coverage(rings, spec, out, stats)
    return BinaryRaster.from_bool(spec, out)


def rasterize_extents(records: Iterable[ExtentRecord], spec: GridSpec,
                      stats: RasterizeStats | None = None) -> BinaryRaster:
    """Rasterize settlement extents with coverage semantics.

    A cell is set when its center lies inside the polygon (even-odd, so
    holes and self-intersections resolve consistently) or the boundary
    crosses the cell rectangle. Self-intersecting rings are counted.
    """
    if spec.resolution < 1.0:
        raise ValueError(f"target resolution {spec.resolution} arc-seconds is below "
                         "the supported 1 arc-second minimum")
    stats = stats if stats is not None else RasterizeStats()
    out = np.zeros((spec.height, spec.width), dtype=bool)
    for rec in records:
        stats.records += 1
        for rings in rec.polygons:
            for ring in rings:
                if ring_self_intersects(ring):
                    stats.self_intersecting_rings += 1
                    log.warning("self-intersecting ring cleaned by even-odd fill")
            _coverage(rings, spec, out, stats)
    return BinaryRaster.from_bool(spec, out)


def fill_center_mask(polygons: list[Polygon], spec: GridSpec) -> np.ndarray:
    """Boolean mask of cells whose center lies inside any of the polygons.

    Center-only semantics (no boundary clause); used for country and
    region membership.
    """
    out = np.zeros((spec.height, spec.width), dtype=bool)
    for rings in polygons:
        _fill_centers(rings, spec, out)
    return out
