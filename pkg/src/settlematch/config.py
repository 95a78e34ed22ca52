"""Pipeline configuration: an INI-style key/value file.

All paths are resolved relative to the config file's directory. See the
README for the documented key set; unknown dataset kinds or malformed
values raise ConfigError.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .mlcore import ModelConfig

DATASET_KINDS = ("footprints", "extents", "population_raster")
DEFAULT_PYRAMID = (1, 2, 4, 8, 16, 30)


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    kind: str
    path: Path
    min_confidence: float = 0.7
    geometry_column: str = "geometry"
    confidence_column: str = "confidence"
    policy: str = "centroid"
    max_false_positive: float = 0.4
    fp_property: str = "prob_false_positive"
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset {self.name!r} has unknown kind {self.kind!r}; "
                              f"expected one of {DATASET_KINDS}")
        if self.policy not in ("centroid", "any-intersection"):
            raise ConfigError(f"dataset {self.name!r} has unknown policy {self.policy!r}")


@dataclass(frozen=True)
class PipelineConfig:
    base_dir: Path
    country_code: str
    regions_path: Path
    hdi_path: Path | None
    datasets: list[DatasetConfig]
    feature_paths: dict[str, Path] = field(default_factory=dict)
    ghsl_projection: str = "lonlat"
    pyramid_factors: tuple[int, ...] = DEFAULT_PYRAMID
    model: ModelConfig = field(default_factory=ModelConfig)
    resolution: float = 3.0
    grid_bounds: tuple[float, float, float, float] | None = None


def _getfloat(section, key, default):
    raw = section.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} = {raw!r} is not a number") from None


def load_pipeline_config(path) -> PipelineConfig:
    """Parse and validate a pipeline config file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} not found")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}") from None
    base = path.parent

    if "country" not in parser:
        raise ConfigError("missing [country] section")
    country = parser["country"]
    code = country.get("code")
    regions = country.get("regions")
    if not code or not regions:
        raise ConfigError("[country] needs 'code' and 'regions'")
    hdi = country.get("hdi")

    datasets = []
    for section_name in parser.sections():
        if not section_name.startswith("dataset."):
            continue
        sec = parser[section_name]
        name = section_name.split(".", 1)[1]
        kind = sec.get("kind", "")
        rel = sec.get("path")
        if not rel:
            raise ConfigError(f"[{section_name}] needs 'path'")
        datasets.append(DatasetConfig(
            name=name,
            kind=kind,
            path=base / rel,
            min_confidence=_getfloat(sec, "min_confidence", 0.7),
            geometry_column=sec.get("geometry_column", "geometry"),
            confidence_column=sec.get("confidence_column", "confidence"),
            policy=sec.get("policy", "centroid"),
            max_false_positive=_getfloat(sec, "max_false_positive", 0.4),
            fp_property=sec.get("fp_property", "prob_false_positive"),
            threshold=_getfloat(sec, "threshold", 0.0),
        ))
    if not datasets:
        raise ConfigError("no [dataset.*] sections found")

    feature_paths = {}
    ghsl_projection = "lonlat"
    if "features" in parser:
        sec = parser["features"]
        for key in ("rwi", "rwi_error", "nightlight", "ghsl"):
            if sec.get(key):
                feature_paths[key] = base / sec.get(key)
        ghsl_projection = sec.get("ghsl_projection", "lonlat")
        if ghsl_projection not in ("lonlat", "mollweide"):
            raise ConfigError(f"ghsl_projection must be lonlat or mollweide, "
                              f"got {ghsl_projection!r}")

    factors = DEFAULT_PYRAMID
    if "pyramid" in parser and parser["pyramid"].get("factors"):
        try:
            factors = tuple(int(v.strip()) for v in parser["pyramid"]["factors"].split(","))
        except ValueError:
            raise ConfigError("pyramid factors must be a comma list of integers") from None

    model = ModelConfig()
    if "model" in parser:
        sec = parser["model"]
        grid = model.lambda_grid
        if sec.get("lambda_grid"):
            try:
                grid = tuple(float(v.strip()) for v in sec["lambda_grid"].split(","))
            except ValueError:
                raise ConfigError("lambda_grid must be a comma list of numbers") from None
        try:
            model = ModelConfig(
                lambda_grid=grid,
                outer_folds=sec.getint("outer_folds", model.outer_folds),
                inner_folds=sec.getint("inner_folds", model.inner_folds),
                max_iterations=sec.getint("max_iterations", model.max_iterations),
                tolerance=_getfloat(sec, "tolerance", model.tolerance),
                seed=sec.getint("seed", model.seed),
                bootstrap_samples=sec.getint("bootstrap_samples", model.bootstrap_samples),
            )
        except ValueError as exc:
            raise ConfigError(f"bad [model] section: {exc}") from None

    bounds = None
    resolution = 3.0
    if "grid" in parser:
        sec = parser["grid"]
        resolution = _getfloat(sec, "resolution", 3.0)
        keys = ("lon_min", "lat_min", "lon_max", "lat_max")
        if any(sec.get(k) for k in keys):
            if not all(sec.get(k) for k in keys):
                raise ConfigError("[grid] bounds need all of lon_min/lat_min/lon_max/lat_max")
            bounds = tuple(_getfloat(sec, k, 0.0) for k in keys)

    return PipelineConfig(
        base_dir=base,
        country_code=code,
        regions_path=base / regions,
        hdi_path=(base / hdi) if hdi else None,
        datasets=datasets,
        feature_paths=feature_paths,
        ghsl_projection=ghsl_projection,
        pyramid_factors=factors,
        model=model,
        resolution=resolution,
        grid_bounds=bounds,
    )
