"""Vector ingest: WKT footprint CSVs, GeoJSON extents, regions, HDI tables.

The CSV reader streams row by row (memory bounded by the largest single
row); the GeoJSON readers load whole feature collections, which is fine
for the region and extent files the pipeline consumes.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..errors import FormatError
from ..geometry import Polygon, close_ring

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FootprintRecord:
    """One building outline with its detection confidence."""

    polygon: Polygon
    confidence: float
    record_id: str = ""


@dataclass(frozen=True)
class ExtentRecord:
    """One settlement-extent shape (possibly multi-part, with holes)."""

    polygons: list[Polygon]
    false_positive_probability: float


@dataclass(frozen=True)
class AdminRegion:
    country_code: str
    region_id: str
    name: str
    polygons: list[Polygon]


@dataclass(frozen=True)
class HdiTable:
    """Per-region human development index values, keyed by region id."""

    values: dict[str, float]

    def __post_init__(self):
        for rid, hdi in self.values.items():
            if not rid:
                raise FormatError("empty region_id in HDI table")
            if not 0.0 <= hdi <= 1.0:
                raise FormatError(f"HDI {hdi} for region {rid!r} outside [0, 1]")


# -- WKT ----------------------------------------------------------------------


def _parse_ring_text(text: str) -> list[tuple[float, float]]:
    pts = []
    for pair in text.split(","):
        parts = pair.split()
        if len(parts) < 2:
            raise ValueError(f"bad coordinate pair {pair!r}")
        pts.append((float(parts[0]), float(parts[1])))
    if len(pts) < 4:
        raise ValueError("ring has fewer than 4 vertices")
    return close_ring(pts)


def parse_wkt_polygon(text: str) -> list[Polygon]:
    """Parse WKT POLYGON or MULTIPOLYGON into a list of polygons."""
    t = text.strip()
    upper = t.upper()
    if upper.startswith("MULTIPOLYGON"):
        body = t[len("MULTIPOLYGON"):].strip()
        if upper.endswith("EMPTY"):
            raise ValueError("empty multipolygon")
        if not (body.startswith("(") and body.endswith(")")):
            raise ValueError("malformed MULTIPOLYGON body")
        inner = body[1:-1].strip()
        polygons = []
        for poly_text in _split_top_level(inner):
            rings = [_parse_ring_text(r) for r in _split_top_level(_strip_parens(poly_text))]
            polygons.append(rings)
        return polygons
    if upper.startswith("POLYGON"):
        body = t[len("POLYGON"):].strip()
        if upper.endswith("EMPTY"):
            raise ValueError("empty polygon")
        if not (body.startswith("(") and body.endswith(")")):
            raise ValueError("malformed POLYGON body")
        rings = [_parse_ring_text(r) for r in _split_top_level(body[1:-1])]
        return [rings]
    raise ValueError(f"unsupported WKT geometry {t[:24]!r}")


def _split_top_level(text: str) -> list[str]:
    """Split a paren-group list '( .. ), ( .. )' into the '..' bodies."""
    parts = []
    depth = 0
    start = None
    for i, ch in enumerate(text):
        if ch == "(":
            if depth == 0:
                start = i + 1
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                parts.append(text[start:i])
            elif depth < 0:
                raise ValueError("unbalanced parentheses in WKT")
    if depth != 0 or not parts:
        raise ValueError("unbalanced parentheses in WKT")
    return parts


def _strip_parens(text: str) -> str:
    t = text.strip()
    return t if t.startswith("(") else f"({t})"


# -- streaming footprint CSV ----------------------------------------------------


class FootprintStream:
    """Streaming reader for building-footprint CSVs.

    Yields FootprintRecord for rows whose confidence is at least
    ``min_confidence`` (boundary inclusive). Rows with unparseable
    geometry are skipped, logged, and counted in ``skipped_rows``.
    """

    def __init__(self, path, min_confidence: float,
                 geometry_column: str = "geometry",
                 confidence_column: str = "confidence",
                 id_column: str | None = None):
        self.path = Path(path)
        self.min_confidence = float(min_confidence)
        self.geometry_column = geometry_column
        self.confidence_column = confidence_column
        self.id_column = id_column
        self.skipped_rows = 0
        self.read_rows = 0

    def __iter__(self):
        with open(self.path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in (self.geometry_column, self.confidence_column):
                if col not in header:
                    raise FormatError(f"column {col!r} missing from {self.path.name} "
                                      f"(has {header})")
            for row in reader:
                self.read_rows += 1
                try:
                    polygons = parse_wkt_polygon(row[self.geometry_column])
                    confidence = float(row[self.confidence_column])
                except (ValueError, TypeError) as exc:
                    self.skipped_rows += 1
                    log.warning("skipping row %d of %s: %s", self.read_rows, self.path.name, exc)
                    continue
                if confidence < self.min_confidence:
                    continue
                rec_id = row.get(self.id_column, "") if self.id_column else ""
                # a footprint is a single polygon; multi parts are split
                for rings in polygons:
                    yield FootprintRecord(rings, confidence, rec_id)


# -- GeoJSON ------------------------------------------------------------------


def _geojson_polygons(geometry: dict) -> list[Polygon]:
    gtype = geometry.get("type")
    coords = geometry.get("coordinates")
    if gtype == "Polygon":
        multis = [coords]
    elif gtype == "MultiPolygon":
        multis = coords
    else:
        raise FormatError(f"unsupported GeoJSON geometry type {gtype!r}")
    polygons = []
    for poly in multis:
        rings = [close_ring([(float(x), float(y)) for x, y, *_ in ring]) for ring in poly]
        polygons.append(rings)
    return polygons


class ExtentStream:
    """Reader for settlement-extent GeoJSON feature collections.

    Yields ExtentRecord for features whose false-positive probability is
    strictly below ``max_false_positive``. Features missing the property
    are skipped with a warning by default, or raise when
    ``missing_property='error'``.
    """

    def __init__(self, path, max_false_positive: float,
                 probability_property: str = "prob_false_positive",
                 missing_property: str = "skip"):
        if missing_property not in ("skip", "error"):
            raise ValueError("missing_property must be 'skip' or 'error'")
        self.path = Path(path)
        self.max_false_positive = float(max_false_positive)
        self.probability_property = probability_property
        self.missing_property = missing_property
        self.skipped_missing = 0

    def __iter__(self):
        with open(self.path, encoding="utf-8") as fh:
            collection = json.load(fh)
        if collection.get("type") != "FeatureCollection":
            raise FormatError(f"{self.path.name} is not a GeoJSON FeatureCollection")
        for i, feature in enumerate(collection.get("features", [])):
            props = feature.get("properties") or {}
            if self.probability_property not in props:
                if self.missing_property == "error":
                    raise FormatError(f"feature {i} missing property "
                                      f"{self.probability_property!r}")
                self.skipped_missing += 1
                log.warning("feature %d of %s missing %r, skipped",
                            i, self.path.name, self.probability_property)
                continue
            prob = float(props[self.probability_property])
            if prob >= self.max_false_positive:
                continue
            yield ExtentRecord(_geojson_polygons(feature["geometry"]), prob)


def read_admin_regions(path) -> list[AdminRegion]:
    """Read admin-1 region polygons from a GeoJSON feature collection.

    Expects properties country_code, region_id and name; region ids must
    be unique within the file.
    """
    with open(path, encoding="utf-8") as fh:
        collection = json.load(fh)
    if collection.get("type") != "FeatureCollection":
        raise FormatError(f"{Path(path).name} is not a GeoJSON FeatureCollection")
    regions = []
    seen = set()
    for i, feature in enumerate(collection.get("features", [])):
        props = feature.get("properties") or {}
        try:
            country = str(props["country_code"])
            region_id = str(props["region_id"])
        except KeyError as exc:
            raise FormatError(f"feature {i} missing property {exc}") from None
        if region_id in seen:
            raise FormatError(f"duplicate region_id {region_id!r}")
        seen.add(region_id)
        regions.append(AdminRegion(country, region_id, str(props.get("name", region_id)),
                                   _geojson_polygons(feature["geometry"])))
    return regions


def read_hdi_csv(path) -> HdiTable:
    """Read a (region_id, hdi) CSV; duplicate region ids are an error."""
    values: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "region_id" not in header or "hdi" not in header:
            raise FormatError(f"HDI table needs region_id and hdi columns, has {header}")
        for row in reader:
            rid = row["region_id"]
            if rid in values:
                raise FormatError(f"duplicate region_id {rid!r} in HDI table")
            values[rid] = float(row["hdi"])
    return HdiTable(values)
