"""Deterministic synthetic countries and naive reference oracles.

The generator builds a ground-truth settlement raster, derives three
perturbed views of it, and emits them through the three real ingest
formats (footprint CSV, extent GeoJSON, 1 arc-second population GeoTIFF)
together with covariate rasters, admin regions, and a development-index
table. Everything is a pure function of the seed via SplitMix64 streams.

The oracle_* functions are naive nested-loop reimplementations of the
production metrics, kept deliberately independent of the optimized code
paths; property tests require exact agreement. They refuse instances
larger than 64x64 cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import ceil, floor
from pathlib import Path

import numpy as np

from .errors import ComputationError
from .geio.tiff import write_geotiff, write_tiff, KEY_MODEL_TYPE, KEY_PROJECTED_CS_TYPE, \
    KEY_RASTER_TYPE, MODEL_TYPE_PROJECTED, ESRI_WORLD_MOLLWEIDE, mollweide_forward, \
    MOLLWEIDE_RADIUS_M
from .geio.vector import AdminRegion, HdiTable
from .grid import BinaryRaster, CategoricalRaster, GridSpec, NumericRaster
from .rng import SplitMix64, derive_seed

ORACLE_MAX_SIDE = 64


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """How one synthetic dataset deviates from the ground truth."""

    dilation: int = 0                    # Chebyshev radius in cells
    dropout: float = 0.0                 # per-cell removal probability
    offset: tuple[int, int] = (0, 0)     # (rows south, cols east)
    score_low: float = 0.8               # confidence / false-positive range
    score_high: float = 0.9

    def __post_init__(self):
        for p in (self.dropout, self.score_low, self.score_high):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must lie in [0, 1], got {p}")
        if self.dilation < 0:
            raise ValueError("dilation radius must be non-negative")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    country_code: str = "SY1"
    width: int = 128
    height: int = 128
    # 3 arc-second lattice indices of the north-west corner; defaults sit
    # near (10E, 0N) and are multiples of 160 so the 30 and 96 arc-second
    # covariate grids nest exactly
    origin_col: int = 228_000
    origin_row: int = 108_000
    n_blobs: int = 12
    blob_min: int = 2
    blob_max: int = 5
    n_regions: int = 3
    footprints: Perturbation = field(default_factory=lambda: Perturbation(score_low=0.75, score_high=0.95))
    extents: Perturbation = field(default_factory=lambda: Perturbation(dilation=1, score_low=0.05, score_high=0.35))
    population: Perturbation = field(default_factory=lambda: Perturbation(dropout=0.1))
    min_confidence: float = 0.7          # thresholds the pipeline will apply
    max_false_positive: float = 0.4
    rwi_base: float = -0.5
    rwi_slope: float = 1.0
    nightlight_scale: float = 20.0
    ghsl_projection: str = "lonlat"      # or "mollweide"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid size must be positive")
        if not 1 <= self.blob_min <= self.blob_max:
            raise ValueError("blob size range invalid")
        if self.n_regions < 1 or self.n_regions > self.width:
            raise ValueError("region count invalid")
        if self.ghsl_projection not in ("lonlat", "mollweide"):
            raise ValueError(f"unknown ghsl projection {self.ghsl_projection!r}")


@dataclass(frozen=True)
class SynthCountry:
    """Everything one synthetic country contributes to the pipeline."""

    config: SynthConfig
    spec: GridSpec
    truth: BinaryRaster
    expected: dict[str, BinaryRaster]    # per dataset, after threshold filters
    footprint_rows: list[tuple[str, str, float]]       # (id, wkt, confidence)
    extent_features: list[tuple[list, float]]          # (geojson coords, fp prob)
    population: NumericRaster            # 1 arc-second
    rwi: NumericRaster
    rwi_error: NumericRaster
    nightlight: NumericRaster
    ghsl: CategoricalRaster              # degree-of-urbanization codes, lon/lat
    regions: list[AdminRegion]
    hdi: HdiTable
    blob_centers: list[tuple[int, int]]


# -- generation helpers ---------------------------------------------------------


def _dilate(cells: np.ndarray, radius: int) -> np.ndarray:
    out = cells.copy()
    for _ in range(radius):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        grown[1:, 1:] |= out[:-1, :-1]
        grown[1:, :-1] |= out[:-1, 1:]
        grown[:-1, 1:] |= out[1:, :-1]
        grown[:-1, :-1] |= out[1:, 1:]
        out = grown
    return out


def _shift(cells: np.ndarray, offset: tuple[int, int]) -> np.ndarray:
    dr, dc = offset
    out = np.zeros_like(cells)
    h, w = cells.shape
    src_r = slice(max(0, -dr), min(h, h - dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_r = slice(max(0, dr), min(h, h + dr))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[dst_r, dst_c] = cells[src_r, src_c]
    return out


def _perturb(truth: np.ndarray, pert: Perturbation, stream: SplitMix64) -> np.ndarray:
    cells = _shift(truth, pert.offset)
    cells = _dilate(cells, pert.dilation)
    if pert.dropout > 0.0:
        idx = np.flatnonzero(cells.reshape(-1))
        keep = stream.uniform(idx.size) >= pert.dropout
        flat = np.zeros(cells.size, dtype=bool)
        flat[idx[keep]] = True
        cells = flat.reshape(cells.shape)
    return cells


def _covering_feature_spec(spec: GridSpec, factor: int) -> GridSpec:
    c0 = spec.col0 // factor
    r0 = spec.row0 // factor
    c1 = -(-(spec.col0 + spec.width) // factor)
    r1 = -(-(spec.row0 + spec.height) // factor)
    return GridSpec.from_lattice(c0, r0, spec.resolution * factor, c1 - c0, r1 - r0)


# class ladder by distance (in 30 arc-second cells) from the nearest blob core
_CLASS_LADDER = [(1.5, 30), (2.5, 23), (3.5, 22), (4.5, 21), (6.0, 13), (8.0, 12)]
_CLASS_FAR = 11
_CLASS_WATER = 10


def generate_country(config: SynthConfig) -> SynthCountry:
    """Build one synthetic country, deterministic in ``config.seed``."""
    spec = GridSpec.from_lattice(config.origin_col, config.origin_row, 3.0,
                                 config.width, config.height)
    h, w = config.height, config.width
    seed = config.seed

    # ground truth: rectangular settlement blobs
    truth = np.zeros((h, w), dtype=bool)
    blob_stream = SplitMix64(derive_seed(seed, "truth"))
    centers = []
    for _ in range(config.n_blobs):
        r = int(blob_stream.integers(1, h)[0])
        c = int(blob_stream.integers(1, w)[0])
        hr = int(blob_stream.integers(1, config.blob_max - config.blob_min + 1)[0]) + config.blob_min - 1
        hc = int(blob_stream.integers(1, config.blob_max - config.blob_min + 1)[0]) + config.blob_min - 1
        truth[max(0, r - hr):min(h, r + hr + 1), max(0, c - hc):min(w, c + hc + 1)] = True
        centers.append((r, c))

    fp_cells = _perturb(truth, config.footprints, SplitMix64(derive_seed(seed, "perturb", "footprints")))
    ext_cells = _perturb(truth, config.extents, SplitMix64(derive_seed(seed, "perturb", "extents")))
    pop_cells = _perturb(truth, config.population, SplitMix64(derive_seed(seed, "perturb", "population")))

    res = spec.res_deg

    # footprints: one small square per settled cell, confidence per record
    fp_idx = np.flatnonzero(fp_cells.reshape(-1))
    score_stream = SplitMix64(derive_seed(seed, "scores", "footprints"))
    p = config.footprints
    confidences = p.score_low + score_stream.uniform(fp_idx.size) * (p.score_high - p.score_low)
    footprint_rows = []
    kept_fp = np.zeros((h, w), dtype=bool)
    for i, (flat, conf) in enumerate(zip(fp_idx, confidences)):
        r, c = divmod(int(flat), w)
        west = spec.origin_lon + (c + 0.2) * res
        east = spec.origin_lon + (c + 0.8) * res
        north = spec.origin_lat - (r + 0.2) * res
        south = spec.origin_lat - (r + 0.8) * res
        wkt = (f"POLYGON (({west!r} {south!r}, {east!r} {south!r}, "
               f"{east!r} {north!r}, {west!r} {north!r}, {west!r} {south!r}))")
        footprint_rows.append((f"B{i:06d}", wkt, float(conf)))
        if conf >= config.min_confidence:
            kept_fp[r, c] = True

    # extents: per-row runs of settled cells as inset rectangles
    ext_stream = SplitMix64(derive_seed(seed, "scores", "extents"))
    q = config.extents
    extent_features = []
    kept_ext = np.zeros((h, w), dtype=bool)
    inset = 0.25
    for r in range(h):
        c = 0
        while c < w:
            if not ext_cells[r, c]:
                c += 1
                continue
            c2 = c
            while c2 + 1 < w and ext_cells[r, c2 + 1]:
                c2 += 1
            prob = float(q.score_low + ext_stream.uniform(1)[0] * (q.score_high - q.score_low))
            west = spec.origin_lon + (c + inset) * res
            east = spec.origin_lon + (c2 + 1 - inset) * res
            north = spec.origin_lat - (r + inset) * res
            south = spec.origin_lat - (r + 1 - inset) * res
            ring = [[west, south], [east, south], [east, north], [west, north], [west, south]]
            extent_features.append(([[ring]], prob))  # MultiPolygon coords
            if prob < config.max_false_positive:
                kept_ext[r, c:c2 + 1] = True
            c = c2 + 1

    # population: 1 arc-second raster, positive on children of settled cells
    pop_spec = GridSpec.from_lattice(spec.col0 * 3, spec.row0 * 3, 1.0, w * 3, h * 3)
    pop_values = np.where(np.kron(pop_cells, np.ones((3, 3), dtype=bool)), 5.0, 0.0).astype(np.float32)
    population = NumericRaster(pop_spec, pop_values)

    # covariates
    rwi_spec = _covering_feature_spec(spec, 32)
    rwi_stream = SplitMix64(derive_seed(seed, "rwi"))
    ramp = config.rwi_base + config.rwi_slope * (np.arange(rwi_spec.width) + 0.5) / rwi_spec.width
    rwi_vals = (np.tile(ramp, (rwi_spec.height, 1))
                + 0.05 * rwi_stream.normal(rwi_spec.n_cells).reshape(rwi_spec.height, rwi_spec.width))
    err_stream = SplitMix64(derive_seed(seed, "rwi_error"))
    err_vals = 0.1 + 0.05 * err_stream.uniform(rwi_spec.n_cells).reshape(rwi_spec.height, rwi_spec.width)

    ntl_spec = _covering_feature_spec(spec, 10)
    ntl_vals = np.zeros((ntl_spec.height, ntl_spec.width))
    cell_r = (np.arange(ntl_spec.height) + 0.5)[:, None]
    cell_c = (np.arange(ntl_spec.width) + 0.5)[None, :]
    for (br, bc) in centers:
        fr = (spec.row0 + br + 0.5 - ntl_spec.row0 * 10) / 10.0
        fc = (spec.col0 + bc + 0.5 - ntl_spec.col0 * 10) / 10.0
        d2 = (cell_r - fr) ** 2 + (cell_c - fc) ** 2
        ntl_vals += config.nightlight_scale * np.exp(-d2 / 8.0)

    dist = np.full((ntl_spec.height, ntl_spec.width), np.inf)
    for (br, bc) in centers:
        fr = (spec.row0 + br + 0.5 - ntl_spec.row0 * 10) / 10.0
        fc = (spec.col0 + bc + 0.5 - ntl_spec.col0 * 10) / 10.0
        dist = np.minimum(dist, np.sqrt((cell_r - fr) ** 2 + (cell_c - fc) ** 2))
    codes = np.full(dist.shape, _CLASS_FAR, dtype=np.uint8)
    for bound, code in reversed(_CLASS_LADDER):
        codes[dist < bound] = code
    codes[:, 0] = _CLASS_WATER  # western strip exercises the water remap
    ghsl = CategoricalRaster(ntl_spec, codes, tuple(sorted({int(v) for v in np.unique(codes)})))

    # admin regions: vertical strips over the full grid
    strip = w // config.n_regions
    regions = []
    for i in range(config.n_regions):
        c_lo = i * strip
        c_hi = w if i == config.n_regions - 1 else (i + 1) * strip
        west = spec.origin_lon + c_lo * res
        east = spec.origin_lon + c_hi * res
        ring = [(west, spec.lat_south), (east, spec.lat_south),
                (east, spec.origin_lat), (west, spec.origin_lat), (west, spec.lat_south)]
        regions.append(AdminRegion(config.country_code, f"{config.country_code}R{i + 1:02d}",
                                   f"Region {i + 1}", [[ring]]))
    hdi_stream = SplitMix64(derive_seed(seed, "hdi"))
    hdi = HdiTable({r.region_id: round(0.3 + 0.6 * float(u), 4)
                    for r, u in zip(regions, hdi_stream.uniform(len(regions)))})

    return SynthCountry(
        config=config,
        spec=spec,
        truth=BinaryRaster.from_bool(spec, truth),
        expected={
            "footprints": BinaryRaster.from_bool(spec, kept_fp),
            "extents": BinaryRaster.from_bool(spec, kept_ext),
            "population": BinaryRaster.from_bool(spec, pop_cells),
        },
        footprint_rows=footprint_rows,
        extent_features=extent_features,
        population=population,
        rwi=NumericRaster(rwi_spec, rwi_vals.astype(np.float32)),
        rwi_error=NumericRaster(rwi_spec, err_vals.astype(np.float32)),
        nightlight=NumericRaster(ntl_spec, ntl_vals.astype(np.float32)),
        ghsl=ghsl,
        regions=regions,
        hdi=hdi,
        blob_centers=centers,
    )


# -- emission -------------------------------------------------------------------


def _write_mollweide_ghsl(country: SynthCountry, path) -> None:
    """Reproject the lon/lat class raster into a Mollweide-frame file."""
    ghsl = country.ghsl
    spec = ghsl.spec
    corners_lon = np.array([spec.origin_lon, spec.lon_east, spec.origin_lon, spec.lon_east])
    corners_lat = np.array([spec.origin_lat, spec.origin_lat, spec.lat_south, spec.lat_south])
    cx, cy = mollweide_forward(corners_lon, corners_lat)
    pixel = 1000.0  # meters
    x0 = floor(cx.min() / pixel) * pixel - pixel
    y0 = ceil(cy.max() / pixel) * pixel + pixel
    w = int(ceil((cx.max() - x0) / pixel)) + 2
    h = int(ceil((y0 - cy.min()) / pixel)) + 2

    # inverse projection of every Mollweide pixel center
    xs = x0 + (np.arange(w) + 0.5) * pixel
    ys = y0 - (np.arange(h) + 0.5) * pixel
    X, Y = np.meshgrid(xs, ys)
    r = MOLLWEIDE_RADIUS_M
    theta = np.arcsin(np.clip(Y / (r * np.sqrt(2.0)), -1.0, 1.0))
    lat = np.degrees(np.arcsin(np.clip((2.0 * theta + np.sin(2.0 * theta)) / np.pi, -1.0, 1.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        lon = np.degrees(np.pi * X / (2.0 * r * np.sqrt(2.0) * np.cos(theta)))
    cols = np.floor((lon - spec.origin_lon) / spec.res_deg).astype(np.int64)
    rows = np.floor((spec.origin_lat - lat) / spec.res_deg).astype(np.int64)
    ok = np.isfinite(lon) & (cols >= 0) & (cols < spec.width) & (rows >= 0) & (rows < spec.height)
    codes = np.full((h, w), 255, dtype=np.uint8)
    codes[ok] = ghsl.codes[rows[ok], cols[ok]]

    write_tiff(path, codes, (pixel, pixel), (x0, y0),
               {KEY_MODEL_TYPE: MODEL_TYPE_PROJECTED, KEY_RASTER_TYPE: 1,
                KEY_PROJECTED_CS_TYPE: ESRI_WORLD_MOLLWEIDE},
               compression="deflate", nodata=255)


def write_country(country: SynthCountry, outdir) -> dict[str, str]:
    """Write all input files plus a ready-to-run pipeline config.

    Returns the map of logical names to file names.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = country.config

    with open(outdir / "buildings.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("id,geometry,confidence\r\n")
        for rec_id, wkt, conf in country.footprint_rows:
            fh.write(f'{rec_id},"{wkt}",{conf!r}\r\n')

    features = [{"type": "Feature",
                 "properties": {"prob_false_positive": prob},
                 "geometry": {"type": "MultiPolygon", "coordinates": coords}}
                for coords, prob in country.extent_features]
    (outdir / "extents.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": features}), encoding="utf-8")

    write_geotiff(country.population, outdir / "population.tif", compression="deflate")
    write_geotiff(country.rwi, outdir / "rwi.tif")
    write_geotiff(country.rwi_error, outdir / "rwi_error.tif")
    write_geotiff(country.nightlight, outdir / "nightlight.tif")
    if cfg.ghsl_projection == "mollweide":
        _write_mollweide_ghsl(country, outdir / "ghsl.tif")
    else:
        write_geotiff(country.ghsl, outdir / "ghsl.tif", compression="deflate")

    region_features = [{"type": "Feature",
                        "properties": {"country_code": r.country_code,
                                       "region_id": r.region_id, "name": r.name},
                        "geometry": {"type": "MultiPolygon",
                                     "coordinates": [[[list(pt) for pt in ring]
                                                      for ring in poly]
                                                     for poly in r.polygons]}}
                       for r in country.regions]
    (outdir / "regions.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": region_features}),
        encoding="utf-8")

    with open(outdir / "hdi.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("region_id,hdi\r\n")
        for rid, value in country.hdi.values.items():
            fh.write(f"{rid},{value!r}\r\n")

    pipeline = f"""# generated pipeline configuration
[country]
code = {cfg.country_code}
regions = regions.geojson
hdi = hdi.csv

[dataset.footprints]
kind = footprints
path = buildings.csv
min_confidence = {cfg.min_confidence}
policy = centroid

[dataset.extents]
kind = extents
path = extents.geojson
max_false_positive = {cfg.max_false_positive}
fp_property = prob_false_positive

[dataset.population]
kind = population_raster
path = population.tif
threshold = 0

[features]
rwi = rwi.tif
rwi_error = rwi_error.tif
nightlight = nightlight.tif
ghsl = ghsl.tif
ghsl_projection = {cfg.ghsl_projection}

[pyramid]
factors = 1,2,4,8,16,30
"""
    (outdir / "pipeline.cfg").write_text(pipeline, encoding="utf-8")
    return {"config": "pipeline.cfg"}


# -- naive oracles ----------------------------------------------------------------


def _check_oracle_size(*arrays) -> None:
    for a in arrays:
        if max(a.shape) > ORACLE_MAX_SIDE:
            raise ComputationError(f"oracle instances are capped at {ORACLE_MAX_SIDE}x"
                                   f"{ORACLE_MAX_SIDE}, got {a.shape}")


def oracle_count(cells: np.ndarray) -> int:
    """Cell count by exhaustive enumeration."""
    _check_oracle_size(cells)
    n = 0
    for r in range(cells.shape[0]):
        for c in range(cells.shape[1]):
            if cells[r, c]:
                n += 1
    return n


def oracle_jaccard(a: np.ndarray, b: np.ndarray) -> float:
    _check_oracle_size(a, b)
    inter = 0
    union = 0
    for r in range(a.shape[0]):
        for c in range(a.shape[1]):
            if a[r, c] and b[r, c]:
                inter += 1
            if a[r, c] or b[r, c]:
                union += 1
    return 1.0 if union == 0 else inter / union


def oracle_upper_limit(a: np.ndarray, b: np.ndarray) -> float:
    ca, cb = oracle_count(a), oracle_count(b)
    return min(ca, cb) / max(ca, cb)


def oracle_average_overlap(rasters: list[np.ndarray]) -> float:
    thetas = []
    for i in range(len(rasters)):
        for j in range(i + 1, len(rasters)):
            thetas.append(oracle_jaccard(rasters[i], rasters[j]))
    return sum(thetas) / len(thetas)


def oracle_blockor(cells: np.ndarray, factor: int, row0: int, col0: int) -> np.ndarray:
    """Block OR anchored on the coarse global lattice, by nested loops."""
    _check_oracle_size(cells)
    h, w = cells.shape
    r_base = row0 // factor
    c_base = col0 // factor
    out_h = (row0 + h - 1) // factor - r_base + 1
    out_w = (col0 + w - 1) // factor - c_base + 1
    out = np.zeros((out_h, out_w), dtype=bool)
    for r in range(h):
        for c in range(w):
            if cells[r, c]:
                out[(row0 + r) // factor - r_base, (col0 + c) // factor - c_base] = True
    return out


def oracle_point_in_rings(x: float, y: float, rings) -> bool:
    """Even-odd ray cast, written independently of the scanline filler."""
    crossings = 0
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            if (y1 > y) != (y2 > y):
                xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if xc > x:
                    crossings += 1
    return crossings % 2 == 1


def _points_in_rings(px: np.ndarray, py: np.ndarray, rings) -> np.ndarray:
    """Even-odd ray cast for many points at once (same rule as the scalar)."""
    crossings = np.zeros(px.shape, dtype=np.int64)
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            if y1 == y2:
                continue
            spans = (y1 > py) != (y2 > py)
            with np.errstate(invalid="ignore"):
                xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            crossings += spans & (xc > px)
    return crossings % 2 == 1


def _points_near_edges(px: np.ndarray, py: np.ndarray, edges, limit: float) -> np.ndarray:
    near = np.zeros(px.shape, dtype=bool)
    for (x1, y1, x2, y2) in edges:
        dx, dy = x2 - x1, y2 - y1
        L2 = dx * dx + dy * dy
        if L2 == 0.0:
            d2 = (px - x1) ** 2 + (py - y1) ** 2
        else:
            t = np.clip(((px - x1) * dx + (py - y1) * dy) / L2, 0.0, 1.0)
            d2 = (px - x1 - t * dx) ** 2 + (py - y1 - t * dy) ** 2
        near |= d2 <= limit * limit
    return near


def _sample_offsets(samples: int) -> np.ndarray:
    return (np.arange(samples) + 0.5) / samples


def oracle_rasterize_coverage(polygons, spec: GridSpec, samples: int = 16):
    """Supersampled coverage oracle.

    Marks a cell when any of its samples x samples interior points lies
    inside any polygon (even-odd). Also returns an ambiguity mask: cells
    where some sample point is within 0.1 cell-widths of a polygon edge
    are exempt from exact comparison. Only cells around the polygon
    bounding boxes need sampling; everything else is unmarked.
    """
    if max(spec.height, spec.width) > ORACLE_MAX_SIDE:
        raise ComputationError(f"oracle instances are capped at {ORACLE_MAX_SIDE} cells per side")
    from .geometry import polygon_bbox

    res = spec.res_deg
    marked = np.zeros((spec.height, spec.width), dtype=bool)
    ambiguous = np.zeros((spec.height, spec.width), dtype=bool)
    edges = [(x1, y1, x2, y2)
             for rings in polygons for ring in rings
             for (x1, y1), (x2, y2) in zip(ring, ring[1:])]
    offs = _sample_offsets(samples)
    fx, fy = np.meshgrid(offs, offs)
    for rings in polygons:
        lon_min, lat_min, lon_max, lat_max = polygon_bbox(rings)
        c_lo = max(0, floor((lon_min - spec.origin_lon) / res) - 1)
        c_hi = min(spec.width - 1, ceil((lon_max - spec.origin_lon) / res) + 1)
        r_lo = max(0, floor((spec.origin_lat - lat_max) / res) - 1)
        r_hi = min(spec.height - 1, ceil((spec.origin_lat - lat_min) / res) + 1)
        for r in range(r_lo, r_hi + 1):
            for c in range(c_lo, c_hi + 1):
                px = spec.origin_lon + (c + fx) * res
                py = spec.origin_lat - (r + fy) * res
                if not marked[r, c]:
                    marked[r, c] = bool(_points_in_rings(px, py, rings).any())
                if not ambiguous[r, c]:
                    ambiguous[r, c] = bool(
                        _points_near_edges(px, py, edges, 0.1 * res).any())
    return marked, ambiguous


def oracle_centroid_cell(rings, spec: GridSpec, samples: int = 16):
    """Estimate the centroid cell from the mean of inside sample points.

    Returns (cell or None, ambiguous); ambiguous when no sample fell
    inside or the estimated centroid is within 0.1 cell-widths of a cell
    border.
    """
    from .geometry import polygon_bbox

    res = spec.res_deg
    lon_min, lat_min, lon_max, lat_max = polygon_bbox(rings)
    c_lo = max(0, floor((lon_min - spec.origin_lon) / res) - 1)
    c_hi = min(spec.width - 1, ceil((lon_max - spec.origin_lon) / res) + 1)
    r_lo = max(0, floor((spec.origin_lat - lat_max) / res) - 1)
    r_hi = min(spec.height - 1, ceil((spec.origin_lat - lat_min) / res) + 1)
    offs = _sample_offsets(samples)
    fx, fy = np.meshgrid(offs, offs)
    sx = sy = 0.0
    n = 0
    for r in range(r_lo, r_hi + 1):
        for c in range(c_lo, c_hi + 1):
            px = spec.origin_lon + (c + fx) * res
            py = spec.origin_lat - (r + fy) * res
            inside = _points_in_rings(px, py, rings)
            k = int(inside.sum())
            if k:
                sx += float(px[inside].sum())
                sy += float(py[inside].sum())
                n += k
    if n == 0:
        return None, True
    cx, cy = sx / n, sy / n
    u = (cx - spec.origin_lon) / res
    v = (spec.origin_lat - cy) / res
    ambiguous = (abs(u - round(u)) < 0.1 or abs(v - round(v)) < 0.1)
    return (int(floor(v)), int(floor(u))), ambiguous


# -- random instances for property tests --------------------------------------------


def random_raster(seed: int, spec: GridSpec, density: float = 0.3,
                  ensure_nonempty: bool = False) -> BinaryRaster:
    """Seeded random raster with roughly the given settled fraction."""
    stream = SplitMix64(derive_seed(seed, "raster"))
    cells = (stream.uniform(spec.n_cells) < density).reshape(spec.height, spec.width)
    if ensure_nonempty and not cells.any():
        cells[spec.height // 2, spec.width // 2] = True
    return BinaryRaster.from_bool(spec, cells)


def random_test_polygon(seed: int, spec: GridSpec):
    """Random rectangle, triangle, or holed rectangle on a quarter-cell lattice."""
    stream = SplitMix64(derive_seed(seed, "polygon"))
    res = spec.res_deg

    def q(lo_cell: float, hi_cell: float) -> float:
        span = int((hi_cell - lo_cell) * 4)
        return lo_cell + int(stream.integers(1, max(span, 1))[0]) / 4.0

    w_cells = spec.width
    h_cells = spec.height
    kind = int(stream.integers(1, 3)[0])
    x1 = q(1, w_cells - 3)
    y1 = q(1, h_cells - 3)
    dx = q(0.5, min(6.0, w_cells - 2 - x1))
    dy = q(0.5, min(6.0, h_cells - 2 - y1))
    x2, y2 = x1 + max(dx, 0.5), y1 + max(dy, 0.5)

    def pt(u_cell, v_cell):
        return (spec.origin_lon + u_cell * res, spec.origin_lat - v_cell * res)

    if kind == 0:  # rectangle
        ring = [pt(x1, y1), pt(x2, y1), pt(x2, y2), pt(x1, y2), pt(x1, y1)]
        return [ring]
    if kind == 1:  # triangle
        x3 = q(1, w_cells - 2)
        ring = [pt(x1, y1), pt(x2, y1), pt(x3, y2), pt(x1, y1)]
        return [ring]
    # rectangle with a centered hole
    mx1, my1 = x1 + (x2 - x1) * 0.3, y1 + (y2 - y1) * 0.3
    mx2, my2 = x1 + (x2 - x1) * 0.7, y1 + (y2 - y1) * 0.7
    outer = [pt(x1, y1), pt(x2, y1), pt(x2, y2), pt(x1, y2), pt(x1, y1)]
    hole = [pt(mx1, my1), pt(mx2, my1), pt(mx2, my2), pt(mx1, my2), pt(mx1, my1)]
    return [outer, hole]
