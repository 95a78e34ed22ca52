"""Bring every source onto the common grid: binarize, aggregate, mask.

Block aggregation anchors its blocks on the global lattice of the coarse
resolution, so aggregating in two steps equals aggregating once and
rasters from different sources stay cell-aligned at every pyramid level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError
from .geio.vector import AdminRegion
from .grid import BinaryRaster, GridSpec, NumericRaster, popcount, row_areas_km2
from .rasterize import fill_center_mask

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CountryMask:
    """Inside-country bits for a grid plus the total masked area."""

    spec: GridSpec
    mask: np.ndarray  # packed uint8 bits, same layout as BinaryRaster
    country_code: str
    area_km2: float

    def to_bool(self) -> np.ndarray:
        flat = np.unpackbits(self.mask, count=self.spec.n_cells)
        return flat.reshape(self.spec.height, self.spec.width).astype(bool)

    @property
    def cell_count(self) -> int:
        return popcount(self.mask)


def binarize(r: NumericRaster, threshold: float) -> BinaryRaster:
    """Cell is settled iff its value is strictly above the threshold.

    No-data cells (NaN) are never settled; a value exactly equal to the
    threshold maps to 0.
    """
    with np.errstate(invalid="ignore"):
        cells = r.values > threshold
    return BinaryRaster.from_bool(r.spec, cells)


def block_or_downscale(r: BinaryRaster, factor: int) -> BinaryRaster:
    """Aggregate to cells ``factor`` times larger; OR over each block.

    A coarse cell is settled if any fine cell within it is settled.
    Blocks are the global-lattice cells of the coarse resolution, so the
    output may extend slightly north/west of the input; edge blocks
    aggregate over the fine cells that exist.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return r
    spec = r.spec
    pad_top = spec.row0 % factor
    pad_left = spec.col0 % factor
    out_h = -(-(pad_top + spec.height) // factor)
    out_w = -(-(pad_left + spec.width) // factor)
    cells = np.zeros((out_h * factor, out_w * factor), dtype=bool)
    cells[pad_top:pad_top + spec.height, pad_left:pad_left + spec.width] = r.to_bool()
    coarse = cells.reshape(out_h, factor, out_w, factor).any(axis=(1, 3))
    out_spec = GridSpec.from_lattice(spec.col0 // factor, spec.row0 // factor,
                                     spec.resolution * factor, out_w, out_h)
    return BinaryRaster.from_bool(out_spec, coarse)


def upscale_1s_to_3s(r: BinaryRaster) -> BinaryRaster:
    """Aggregate a 1 arc-second raster onto the global 3 arc-second lattice."""
    if abs(r.spec.resolution - 1.0) > 1e-9:
        raise AlignmentError(f"input resolution is {r.spec.resolution} arc-seconds, expected 1")
    return block_or_downscale(r, 3)


def build_country_mask(regions: list[AdminRegion], spec: GridSpec) -> CountryMask:
    """Mask of cells whose center lies inside the union of region polygons."""
    if not regions:
        raise ValueError("region list is empty")
    polygons = [poly for region in regions for poly in region.polygons]
    inside = fill_center_mask(polygons, spec)
    areas = row_areas_km2(spec)
    area = float((inside.sum(axis=1) * areas).sum())
    bits = np.packbits(inside.reshape(-1))
    bits.setflags(write=False)
    return CountryMask(spec, bits, regions[0].country_code, area)


def mask_to_country(r: BinaryRaster, regions: list[AdminRegion]) -> tuple[BinaryRaster, CountryMask]:
    """Clear cells whose center falls outside the country polygons.

    Unmasked source rasters carry settlement beyond the border; the
    center rule keeps mask area consistent with cell-area sums.
    """
    mask = build_country_mask(regions, r.spec)
    return apply_mask(r, mask), mask


def apply_mask(r: BinaryRaster, mask: CountryMask) -> BinaryRaster:
    if not r.spec.matches(mask.spec):
        raise AlignmentError("mask grid does not match raster grid")
    bits = r.bits & mask.mask
    bits.setflags(write=False)
    return BinaryRaster(r.spec, bits)


def embed_on_grid(r: BinaryRaster, target: GridSpec) -> BinaryRaster:
    """Place a raster onto another grid of the same resolution.

    Overlapping cells carry over; source cells outside the target are
    dropped, target cells outside the source stay unsettled.
    """
    if not r.spec.same_resolution(target):
        raise AlignmentError(f"resolution mismatch: {r.spec.resolution} vs {target.resolution}")
    if r.spec.matches(target):
        return r
    out = np.zeros((target.height, target.width), dtype=bool)
    src = r.to_bool()
    dr = r.spec.row0 - target.row0
    dc = r.spec.col0 - target.col0
    src_r0 = max(0, -dr)
    src_c0 = max(0, -dc)
    dst_r0 = max(0, dr)
    dst_c0 = max(0, dc)
    n_rows = min(r.spec.height - src_r0, target.height - dst_r0)
    n_cols = min(r.spec.width - src_c0, target.width - dst_c0)
    if n_rows > 0 and n_cols > 0:
        out[dst_r0:dst_r0 + n_rows, dst_c0:dst_c0 + n_cols] = \
            src[src_r0:src_r0 + n_rows, src_c0:src_c0 + n_cols]
    return BinaryRaster.from_bool(target, out)
