"""Georeferenced raster data model.

Every raster in the package lives on a global longitude/latitude lattice
anchored at (-180 deg, +90 deg): a grid's origin is always a whole number
of cells away from that corner. Two grids with the same resolution are
therefore cell-aligned by construction and cross-dataset alignment reduces
to integer index translation.

Binary layers are stored bit-packed (8 cells per byte, row-major) so that
intersections, unions, and counts over ~1e8 cells run as word-parallel
bitwise operations and popcounts.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, cos, floor, radians

import numpy as np

from .errors import AlignmentError

EARTH_RADIUS_M = 6_371_000.0

# Lattice arithmetic tolerance, in degrees. Grid producers snap before
# constructing, so anything farther off than this is a real misalignment.
ALIGN_TOL_DEG = 1e-9

NODATA_CODE = 255


def _lattice_index(offset_deg: float, res_deg: float, what: str) -> int:
    idx = offset_deg / res_deg
    nearest = round(idx)
    if abs(idx - nearest) * res_deg > ALIGN_TOL_DEG:
        raise AlignmentError(
            f"{what} is {offset_deg!r} deg from the lattice anchor, "
            f"not a whole multiple of the {res_deg!r} deg cell size"
        )
    return int(nearest)


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a raster: origin (north-west corner), cell size, shape.

    ``origin_lon`` is the west edge of column 0 and ``origin_lat`` the
    north edge of row 0, in degrees. ``resolution`` is the cell side in
    arc-seconds. Rows run north to south, columns west to east.
    """

    origin_lon: float
    origin_lat: float
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.resolution > 0):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid shape must be positive, got {self.width}x{self.height}")
        res = self.res_deg
        _lattice_index(self.origin_lon + 180.0, res, "origin_lon")
        _lattice_index(90.0 - self.origin_lat, res, "origin_lat")
        if self.origin_lon < -180.0 - ALIGN_TOL_DEG or self.lon_east > 180.0 + ALIGN_TOL_DEG:
            raise ValueError(f"longitudes [{self.origin_lon}, {self.lon_east}] outside [-180, 180]")
        if self.origin_lat > 90.0 + ALIGN_TOL_DEG or self.lat_south < -90.0 - ALIGN_TOL_DEG:
            raise ValueError(f"latitudes [{self.lat_south}, {self.origin_lat}] outside [-90, 90]")

    # -- derived geometry -------------------------------------------------

    @property
    def res_deg(self) -> float:
        return self.resolution / 3600.0

    @property
    def lon_east(self) -> float:
        return self.origin_lon + self.width * self.res_deg

    @property
    def lat_south(self) -> float:
        return self.origin_lat - self.height * self.res_deg

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def col0(self) -> int:
        """Global column index of column 0 on the lattice for this resolution."""
        return _lattice_index(self.origin_lon + 180.0, self.res_deg, "origin_lon")

    @property
    def row0(self) -> int:
        """Global row index (from +90 deg) of row 0."""
        return _lattice_index(90.0 - self.origin_lat, self.res_deg, "origin_lat")

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        """(lon, lat) of the center of cell (row, col)."""
        res = self.res_deg
        return (self.origin_lon + (col + 0.5) * res, self.origin_lat - (row + 0.5) * res)

    def center_lons(self) -> np.ndarray:
        return self.origin_lon + (np.arange(self.width) + 0.5) * self.res_deg

    def center_lats(self) -> np.ndarray:
        return self.origin_lat - (np.arange(self.height) + 0.5) * self.res_deg

    # -- lattice relations -------------------------------------------------

    def same_resolution(self, other: "GridSpec") -> bool:
        return abs(self.resolution - other.resolution) <= 1e-9 * max(self.resolution, other.resolution)

    def matches(self, other: "GridSpec") -> bool:
        """True if the two specs denote the same grid (same lattice cells)."""
        return (
            self.same_resolution(other)
            and self.col0 == other.col0
            and self.row0 == other.row0
            and self.width == other.width
            and self.height == other.height
        )

    def contains_spec(self, sub: "GridSpec") -> bool:
        """True if ``sub`` is cell-aligned with and contained in this grid."""
        if not self.same_resolution(sub):
            return False
        dr = sub.row0 - self.row0
        dc = sub.col0 - self.col0
        return 0 <= dr and 0 <= dc and dr + sub.height <= self.height and dc + sub.width <= self.width

    def translate(self, drow: int, dcol: int) -> "GridSpec":
        """Spec shifted by whole cells (positive drow moves south)."""
        return GridSpec.from_lattice(
            self.col0 + dcol, self.row0 + drow, self.resolution, self.width, self.height
        )

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_lattice(cls, col0: int, row0: int, resolution: float, width: int, height: int) -> "GridSpec":
        """Build a spec from global lattice indices (the canonical route)."""
        res = resolution / 3600.0
        return cls(-180.0 + col0 * res, 90.0 - row0 * res, resolution, width, height)

    @classmethod
    def from_bounds(cls, lon_min: float, lat_min: float, lon_max: float, lat_max: float,
                    resolution: float) -> "GridSpec":
        """Tightest lattice-aligned grid covering the given bounding box."""
        if lon_max <= lon_min or lat_max <= lat_min:
            raise ValueError("empty bounding box")
        res = resolution / 3600.0
        eps = 1e-9
        c0 = floor((lon_min + 180.0) / res + eps)
        c1 = ceil((lon_max + 180.0) / res - eps)
        r0 = floor((90.0 - lat_max) / res + eps)
        r1 = ceil((90.0 - lat_min) / res - eps)
        return cls.from_lattice(c0, r0, resolution, max(c1 - c0, 1), max(r1 - r0, 1))


# -- raster containers ------------------------------------------------------


def _pack_bool(arr: np.ndarray) -> np.ndarray:
    packed = np.packbits(arr.reshape(-1))
    packed.setflags(write=False)
    return packed


@dataclass(frozen=True, eq=False)
class BinaryRaster:
    """Bit-per-cell settled/unsettled layer (1 = settled).

    ``bits`` packs the row-major cell sequence 8 cells per byte, most
    significant bit first; trailing pad bits are always zero.
    """

    spec: GridSpec
    bits: np.ndarray

    def __post_init__(self):
        expected = (self.spec.n_cells + 7) // 8
        if self.bits.dtype != np.uint8 or self.bits.shape != (expected,):
            raise ValueError(f"bit array must be uint8 of length {expected}, got "
                             f"{self.bits.dtype} {self.bits.shape}")

    @classmethod
    def from_bool(cls, spec: GridSpec, arr: np.ndarray) -> "BinaryRaster":
        arr = np.asarray(arr, dtype=bool)
        if arr.shape != (spec.height, spec.width):
            raise ValueError(f"array shape {arr.shape} does not match grid "
                             f"{spec.height}x{spec.width}")
        return cls(spec, _pack_bool(arr))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "BinaryRaster":
        bits = np.zeros((spec.n_cells + 7) // 8, dtype=np.uint8)
        bits.setflags(write=False)
        return cls(spec, bits)

    def to_bool(self) -> np.ndarray:
        """(height, width) boolean view of the cells."""
        flat = np.unpackbits(self.bits, count=self.spec.n_cells)
        return flat.reshape(self.spec.height, self.spec.width).astype(bool)

    @property
    def count(self) -> int:
        return count_settled(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryRaster):
            return NotImplemented
        return self.spec.matches(other.spec) and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class NumericRaster:
    """Real-valued layer; NaN is the no-data sentinel."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.spec.height, self.spec.width):
            raise ValueError(f"value array shape {self.values.shape} does not match grid "
                             f"{self.spec.height}x{self.spec.width}")
        if not np.issubdtype(self.values.dtype, np.floating):
            raise ValueError(f"values must be floating point, got {self.values.dtype}")


@dataclass(frozen=True, eq=False)
class CategoricalRaster:
    """Small-integer class codes; code 255 is the no-data sentinel."""

    spec: GridSpec
    codes: np.ndarray
    categories: tuple[int, ...]

    def __post_init__(self):
        if self.codes.shape != (self.spec.height, self.spec.width):
            raise ValueError(f"code array shape {self.codes.shape} does not match grid "
                             f"{self.spec.height}x{self.spec.width}")
        if self.codes.dtype != np.uint8:
            raise ValueError(f"codes must be uint8, got {self.codes.dtype}")
        valid = np.isin(self.codes, np.asarray(self.categories + (NODATA_CODE,), dtype=np.uint8))
        if not valid.all():
            bad = np.unique(self.codes[~valid])
            raise ValueError(f"codes {bad.tolist()} outside declared categories {self.categories}")


# -- operations ---------------------------------------------------------------


def cell_area_km2(spec: GridSpec, row: int) -> float:
    """Area of one cell in the given row, in square kilometres.

    Spherical model: A = (R * delta)^2 * cos(phi) with R = 6371 km,
    delta the cell side in radians and phi the latitude of the row's
    cell centers.
    """
    if not 0 <= row < spec.height:
        raise IndexError(f"row {row} out of range for height {spec.height}")
    delta = radians(spec.res_deg)
    phi = radians(spec.origin_lat - (row + 0.5) * spec.res_deg)
    return (EARTH_RADIUS_M * delta) ** 2 * cos(phi) / 1e6


def row_areas_km2(spec: GridSpec) -> np.ndarray:
    """Per-row cell areas in km2 (vectorized companion of cell_area_km2)."""
    delta = radians(spec.res_deg)
    phi = np.radians(spec.center_lats())
    return (EARTH_RADIUS_M * delta) ** 2 * np.cos(phi) / 1e6


def popcount(packed: np.ndarray) -> int:
    """Total number of set bits in a packed uint8 array."""
    return int(np.bitwise_count(packed).sum(dtype=np.int64))


def count_settled(r: BinaryRaster) -> int:
    """Number of settled cells (popcount over the packed words)."""
    return popcount(r.bits)


def window(r: BinaryRaster, sub: GridSpec) -> BinaryRaster:
    """Extract the sub-rectangle ``sub`` from ``r``.

    ``sub`` must share the resolution of ``r`` and lie fully inside it;
    windowing a raster with its own spec is the identity.
    """
    if not r.spec.same_resolution(sub):
        raise AlignmentError(
            f"window resolution {sub.resolution} differs from raster resolution {r.spec.resolution}")
    if not r.spec.contains_spec(sub):
        raise AlignmentError("window is not contained in the raster extent")
    dr = sub.row0 - r.spec.row0
    dc = sub.col0 - r.spec.col0
    cells = r.to_bool()[dr:dr + sub.height, dc:dc + sub.width]
    return BinaryRaster.from_bool(sub, cells)
