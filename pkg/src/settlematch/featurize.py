"""Build the per-cell design matrix for the agreement model.

A row exists for every cell at least one dataset considers settled; the
label is 1 exactly when all three datasets mark the cell. Covariates are
sampled nearest-neighbor from their native (coarser) grids, water cells
are folded into the very-low-density class, and the settlement class is
one-hot encoded against the suburban reference.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ComputationError, FormatError
from .grid import NODATA_CODE, BinaryRaster, CategoricalRaster, GridSpec, NumericRaster

log = logging.getLogger(__name__)


class SettlementClass(IntEnum):
    """Degree-of-urbanization classes, densest first."""

    URBAN_CENTRE = 7
    DENSE_URBAN_CLUSTER = 6
    SEMI_DENSE_URBAN_CLUSTER = 5
    SUBURBAN = 4
    RURAL_CLUSTER = 3
    LOW_DENSITY_RURAL = 2
    VERY_LOW_DENSITY_RURAL = 1
    WATER = 0


# Degree-of-urbanization raster codes (the 1 km product's SMOD coding)
# mapped onto the class enum; identity codes 0..7 are accepted too.
GHSL_SMOD_CODES: dict[int, SettlementClass] = {
    30: SettlementClass.URBAN_CENTRE,
    23: SettlementClass.DENSE_URBAN_CLUSTER,
    22: SettlementClass.SEMI_DENSE_URBAN_CLUSTER,
    21: SettlementClass.SUBURBAN,
    13: SettlementClass.RURAL_CLUSTER,
    12: SettlementClass.LOW_DENSITY_RURAL,
    11: SettlementClass.VERY_LOW_DENSITY_RURAL,
    10: SettlementClass.WATER,
    **{int(c): c for c in SettlementClass},
}

NUMERIC_FEATURES = ["rwi", "rwi_error", "nightlight"]

# one-hot columns, suburban omitted as the reference class
INDICATOR_CLASSES = [
    SettlementClass.URBAN_CENTRE,
    SettlementClass.DENSE_URBAN_CLUSTER,
    SettlementClass.SEMI_DENSE_URBAN_CLUSTER,
    SettlementClass.RURAL_CLUSTER,
    SettlementClass.LOW_DENSITY_RURAL,
    SettlementClass.VERY_LOW_DENSITY_RURAL,
]

FEATURE_NAMES = NUMERIC_FEATURES + [f"class_{c.name.lower()}" for c in INDICATOR_CLASSES]

# "rural cluster or denser" counts as high population density
HIGH_DENSITY_CLASSES = frozenset({
    SettlementClass.RURAL_CLUSTER, SettlementClass.SUBURBAN,
    SettlementClass.SEMI_DENSE_URBAN_CLUSTER, SettlementClass.DENSE_URBAN_CLUSTER,
    SettlementClass.URBAN_CENTRE,
})


def label_cells(x: BinaryRaster, y: BinaryRaster, z: BinaryRaster) -> tuple[np.ndarray, np.ndarray]:
    """Cells settled in at least one raster, labeled 1 when settled in all.

    Returns (cells, labels): cells is an (n, 2) array of (row, col) in
    row-major order, labels a uint8 vector.
    """
    if not (x.spec.matches(y.spec) and x.spec.matches(z.spec)):
        raise AlignmentError("rasters are on different grids")
    union = np.unpackbits(x.bits | y.bits | z.bits, count=x.spec.n_cells)
    inter = np.unpackbits(x.bits & y.bits & z.bits, count=x.spec.n_cells)
    flat = np.flatnonzero(union)
    rows, cols = np.divmod(flat, x.spec.width)
    cells = np.column_stack([rows, cols]).astype(np.uint32)
    return cells, inter[flat].astype(np.uint8)


def _sample_values(feature: NumericRaster | CategoricalRaster,
                   lons: np.ndarray, lats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbor sample at the given centers; (values, valid mask)."""
    spec = feature.spec
    cols = np.floor((lons - spec.origin_lon) / spec.res_deg).astype(np.int64)
    rows = np.floor((spec.origin_lat - lats) / spec.res_deg).astype(np.int64)
    ok = (cols >= 0) & (cols < spec.width) & (rows >= 0) & (rows < spec.height)
    if isinstance(feature, CategoricalRaster):
        values = np.full(lons.shape, NODATA_CODE, dtype=np.uint8)
        values[ok] = feature.codes[rows[ok], cols[ok]]
        return values, ok & (values != NODATA_CODE)
    values = np.full(lons.shape, np.nan, dtype=np.float64)
    values[ok] = feature.values[rows[ok], cols[ok]]
    return values, np.isfinite(values)


def sample_feature(feature: NumericRaster | CategoricalRaster, spec_3s: GridSpec,
                   cell_id: tuple[int, int]):
    """Value of the feature cell containing one 3-arc-second cell's center.

    Returns None when the center falls outside the feature raster or in a
    no-data cell.
    """
    row, col = cell_id
    lon, lat = spec_3s.cell_center(row, col)
    values, ok = _sample_values(feature, np.array([lon]), np.array([lat]))
    if not ok[0]:
        return None
    v = values[0]
    return int(v) if isinstance(feature, CategoricalRaster) else float(v)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Columnar per-cell table feeding the agreement model."""

    countries: tuple[str, ...]
    country_idx: np.ndarray  # uint16
    cell_row: np.ndarray     # uint32
    cell_col: np.ndarray     # uint32
    label: np.ndarray        # uint8
    rwi: np.ndarray          # float32
    rwi_error: np.ndarray    # float32
    nightlight: np.ndarray   # float32
    settlement_class: np.ndarray  # uint8, water already remapped
    dropped_missing: int = 0

    def __post_init__(self):
        n = self.n_rows
        for name in ("country_idx", "cell_row", "cell_col", "label", "rwi",
                     "rwi_error", "nightlight", "settlement_class"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column {name} has wrong length")
        if np.any(self.settlement_class == int(SettlementClass.WATER)):
            raise ValueError("water rows must be remapped before table construction")

    @property
    def n_rows(self) -> int:
        return self.label.size

    def design_matrix(self) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
        """(feature names, X, y, country groups) for model fitting."""
        n = self.n_rows
        X = np.zeros((n, len(FEATURE_NAMES)), dtype=np.float64)
        X[:, 0] = self.rwi
        X[:, 1] = self.rwi_error
        X[:, 2] = self.nightlight
        for k, cls in enumerate(INDICATOR_CLASSES):
            X[:, 3 + k] = self.settlement_class == int(cls)
        return list(FEATURE_NAMES), X, self.label.astype(np.int8), self.country_idx.copy()

    # -- persistence ------------------------------------------------------

    _MAGIC = b"SMFT1\n"
    # column order and little-endian storage dtypes of the cache format
    _COLUMNS = [("country_idx", "<u2"), ("cell_row", "<u4"), ("cell_col", "<u4"),
                ("label", "u1"), ("rwi", "<f4"), ("rwi_error", "<f4"),
                ("nightlight", "<f4"), ("settlement_class", "u1")]

    def save(self, path) -> None:
        """Columnar binary cache: magic, JSON header, fixed-width columns."""
        header = json.dumps({"countries": list(self.countries), "n_rows": self.n_rows,
                             "dropped_missing": self.dropped_missing}, sort_keys=True)
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(header.encode("utf-8") + b"\n")
            for name, dt in self._COLUMNS:
                fh.write(np.ascontiguousarray(getattr(self, name), dtype=dt).tobytes())

    @classmethod
    def load(cls, path) -> "FeatureTable":
        with open(path, "rb") as fh:
            if fh.read(len(cls._MAGIC)) != cls._MAGIC:
                raise FormatError(f"{Path(path).name} is not a feature-table cache")
            header = json.loads(fh.readline().decode("utf-8"))
            n = header["n_rows"]
            cols = {}
            for name, dt in cls._COLUMNS:
                raw = fh.read(n * np.dtype(dt).itemsize)
                arr = np.frombuffer(raw, dtype=dt)
                if arr.size != n:
                    raise FormatError(f"{Path(path).name} truncated in column {name}")
                cols[name] = np.ascontiguousarray(arr, dtype=np.dtype(dt).newbyteorder("="))
        return cls(countries=tuple(header["countries"]),
                   dropped_missing=header["dropped_missing"], **cols)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["country_code", "cell_row", "cell_col", "label",
                             "rwi", "rwi_error", "nightlight", "settlement_class"])
            for i in range(self.n_rows):
                writer.writerow([
                    self.countries[self.country_idx[i]],
                    int(self.cell_row[i]), int(self.cell_col[i]), int(self.label[i]),
                    f"{self.rwi[i]:.6g}", f"{self.rwi_error[i]:.6g}",
                    f"{self.nightlight[i]:.6g}",
                    SettlementClass(int(self.settlement_class[i])).name.lower(),
                ])

    @staticmethod
    def concat(tables: list["FeatureTable"]) -> "FeatureTable":
        """Stack per-country tables into one joint table."""
        if not tables:
            raise ValueError("no tables to concatenate")
        countries: list[str] = []
        idx_parts = []
        for t in tables:
            remap = np.array([_country_index(countries, c) for c in t.countries],
                             dtype=np.uint16)
            idx_parts.append(remap[t.country_idx])
        return FeatureTable(
            countries=tuple(countries),
            country_idx=np.concatenate(idx_parts),
            cell_row=np.concatenate([t.cell_row for t in tables]),
            cell_col=np.concatenate([t.cell_col for t in tables]),
            label=np.concatenate([t.label for t in tables]),
            rwi=np.concatenate([t.rwi for t in tables]),
            rwi_error=np.concatenate([t.rwi_error for t in tables]),
            nightlight=np.concatenate([t.nightlight for t in tables]),
            settlement_class=np.concatenate([t.settlement_class for t in tables]),
            dropped_missing=sum(t.dropped_missing for t in tables),
        )


def _country_index(countries: list[str], code: str) -> int:
    if code not in countries:
        countries.append(code)
    return countries.index(code)


def build_table(x: BinaryRaster, y: BinaryRaster, z: BinaryRaster,
                rwi: NumericRaster, rwi_error: NumericRaster,
                nightlight: NumericRaster, settlement: CategoricalRaster,
                country_code: str,
                class_codes: dict[int, SettlementClass] | None = None) -> FeatureTable:
    """Assemble the design table for one country.

    Rows with any missing covariate are dropped and counted (complete-case
    analysis); water cells are kept but recoded as very low density rural.
    Row order is deterministic (row-major by cell).
    """
    class_codes = GHSL_SMOD_CODES if class_codes is None else class_codes
    cells, labels = label_cells(x, y, z)
    spec = x.spec
    lons = spec.origin_lon + (cells[:, 1].astype(np.float64) + 0.5) * spec.res_deg
    lats = spec.origin_lat - (cells[:, 0].astype(np.float64) + 0.5) * spec.res_deg

    rwi_v, rwi_ok = _sample_values(rwi, lons, lats)
    err_v, err_ok = _sample_values(rwi_error, lons, lats)
    ntl_v, ntl_ok = _sample_values(nightlight, lons, lats)
    cls_v, cls_ok = _sample_values(settlement, lons, lats)

    lut = np.full(256, NODATA_CODE, dtype=np.uint8)
    for code, cls in class_codes.items():
        lut[code] = int(cls)
    mapped = lut[cls_v]
    cls_ok &= mapped != NODATA_CODE
    # keep the information from water cells under the very-low-density class
    mapped[mapped == int(SettlementClass.WATER)] = int(SettlementClass.VERY_LOW_DENSITY_RURAL)

    keep = rwi_ok & err_ok & ntl_ok & cls_ok
    dropped = int((~keep).sum())
    if dropped:
        log.info("dropped %d of %d cells with missing covariates", dropped, keep.size)

    return FeatureTable(
        countries=(country_code,),
        country_idx=np.zeros(int(keep.sum()), dtype=np.uint16),
        cell_row=cells[keep, 0].astype(np.uint32),
        cell_col=cells[keep, 1].astype(np.uint32),
        label=labels[keep],
        rwi=rwi_v[keep].astype(np.float32),
        rwi_error=err_v[keep].astype(np.float32),
        nightlight=ntl_v[keep].astype(np.float32),
        settlement_class=mapped[keep],
        dropped_missing=dropped,
    )


def density_split_ratio(table: FeatureTable,
                        high_classes: frozenset = HIGH_DENSITY_CLASSES) -> float:
    """Agreement-rate ratio between high and low population-density cells.

    P(label=1 | high) / P(label=1 | low), with high density meaning the
    settlement class is rural cluster or denser.
    """
    high_codes = np.array(sorted(int(c) for c in high_classes), dtype=np.uint8)
    high = np.isin(table.settlement_class, high_codes)
    n_high = int(high.sum())
    n_low = int((~high).sum())
    if n_high == 0 or n_low == 0:
        raise ComputationError("both density strata must be nonempty")
    p_high = float(table.label[high].mean())
    p_low = float(table.label[~high].mean())
    if p_low == 0.0:
        raise ComputationError("low-density stratum has zero agreement rate")
    return p_high / p_low
