"""Command-line pipeline: synth, harmonize, overlap, zonal, features, train, report.

Every command is deterministic for fixed inputs and seeds, and idempotent
on unchanged inputs: harmonize keys its per-dataset caches by an input
content hash (with an mtime+size fast path), and downstream commands read
those caches. The --threads flag only parallelizes independent dataset
builds; it never changes output bytes.

Exit codes: 0 success, 1 computation error, 2 usage or configuration
error, 3 I/O error while writing.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .agreement import compute_overlap_report, overlap_pyramid
from .config import DatasetConfig, PipelineConfig, load_pipeline_config
from .errors import ComputationError, ConfigError, SettlematchError
from .featurize import FeatureTable, build_table
from .figures import choropleth_svg, counts_scatter_svg, odds_ratio_svg
from .geio.reports import (
    read_binary_raster,
    write_binary_raster,
    write_csv,
    write_json,
    write_report,
)
from .geio.tiff import read_geotiff, read_mollweide_geotiff
from .geio.vector import ExtentStream, FootprintStream, read_admin_regions, read_hdi_csv
from .grid import BinaryRaster, GridSpec, NumericRaster
from .harmonize import (
    CountryMask,
    apply_mask,
    binarize,
    block_or_downscale,
    build_country_mask,
    embed_on_grid,
)
from .mlcore import ModelConfig, train_model
from .rasterize import RasterizePolicy, RasterizeStats, rasterize_extents, rasterize_footprints
from .rng import SplitMix64, derive_seed
from .synth import Perturbation, SynthConfig, generate_country, write_country
from .zonal import hdi_association, join_hdi, zonal_overlap


def _err(msg: str) -> None:
    print(f"settlematch: {msg}", file=sys.stderr)


# -- shared pipeline pieces -----------------------------------------------------


def _country_grid(cfg: PipelineConfig) -> GridSpec:
    if cfg.grid_bounds:
        lon_min, lat_min, lon_max, lat_max = cfg.grid_bounds
    else:
        regions = read_admin_regions(cfg.regions_path)
        xs = [x for r in regions for poly in r.polygons for ring in poly for x, _ in ring]
        ys = [y for r in regions for poly in r.polygons for ring in poly for _, y in ring]
        lon_min, lat_min, lon_max, lat_max = min(xs), min(ys), max(xs), max(ys)
    return GridSpec.from_bounds(lon_min, lat_min, lon_max, lat_max, cfg.resolution)


def _spec_key(spec: GridSpec) -> dict:
    return {"col0": spec.col0, "row0": spec.row0, "resolution": spec.resolution,
            "width": spec.width, "height": spec.height}


def _dataset_params(ds: DatasetConfig) -> dict:
    return {"kind": ds.kind, "min_confidence": ds.min_confidence,
            "geometry_column": ds.geometry_column, "confidence_column": ds.confidence_column,
            "policy": ds.policy, "max_false_positive": ds.max_false_positive,
            "fp_property": ds.fp_property, "threshold": ds.threshold}


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _build_dataset(ds: DatasetConfig, spec: GridSpec, mask: CountryMask) -> tuple[BinaryRaster, dict]:
    """Ingest, rasterize/binarize, regrid, and mask one dataset."""
    stats: dict = {}
    if ds.kind == "footprints":
        stream = FootprintStream(ds.path, ds.min_confidence,
                                 geometry_column=ds.geometry_column,
                                 confidence_column=ds.confidence_column)
        rstats = RasterizeStats()
        policy = RasterizePolicy(ds.policy)
        raster = rasterize_footprints(stream, spec, policy, rstats)
        stats = {"records": rstats.records, "skipped_rows": stream.skipped_rows,
                 "degenerate_polygons": rstats.degenerate_polygons}
    elif ds.kind == "extents":
        stream = ExtentStream(ds.path, ds.max_false_positive,
                              probability_property=ds.fp_property)
        rstats = RasterizeStats()
        raster = rasterize_extents(stream, spec, rstats)
        stats = {"records": rstats.records, "skipped_missing": stream.skipped_missing,
                 "self_intersecting_rings": rstats.self_intersecting_rings}
    else:  # population_raster
        grid_raster = read_geotiff(ds.path)
        if not isinstance(grid_raster, NumericRaster):
            raise ConfigError(f"dataset {ds.name}: {ds.path.name} is not a numeric raster")
        binary = binarize(grid_raster, ds.threshold)
        ratio = spec.resolution / binary.spec.resolution
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ConfigError(f"dataset {ds.name}: resolution {binary.spec.resolution} "
                              f"does not divide the {spec.resolution} arc-second target")
        binary = block_or_downscale(binary, int(round(ratio)))
        raster = embed_on_grid(binary, spec)
        stats = {"source_resolution": grid_raster.spec.resolution}
    return apply_mask(raster, mask), stats


def _harmonize_one(ds: DatasetConfig, spec: GridSpec, mask: CountryMask,
                   cache_dir: Path, regions_sha: str) -> tuple[str, BinaryRaster, dict, bool]:
    if not ds.path.exists():
        raise FileNotFoundError(f"dataset {ds.name}: input file {ds.path} not found")
    params = _dataset_params(ds)
    meta_path = cache_dir / f"{ds.name}.meta.json"
    cache_path = cache_dir / f"{ds.name}.smbr"
    stat = ds.path.stat()
    identity = {"params": params, "spec": _spec_key(spec), "regions_sha": regions_sha}

    if meta_path.exists() and cache_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("identity") == identity:
            if (meta.get("input_mtime_ns") == stat.st_mtime_ns
                    and meta.get("input_size") == stat.st_size) \
                    or meta.get("input_sha256") == _sha256_file(ds.path):
                return ds.name, read_binary_raster(cache_path), meta.get("stats", {}), True

    raster, stats = _build_dataset(ds, spec, mask)
    write_binary_raster(raster, cache_path)
    meta = {"identity": identity, "input_sha256": _sha256_file(ds.path),
            "input_mtime_ns": stat.st_mtime_ns, "input_size": stat.st_size,
            "count": raster.count, "stats": stats}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return ds.name, raster, stats, False


def _load_caches(cfg: PipelineConfig, out: Path) -> tuple[list[str], list[BinaryRaster]]:
    cache_dir = out / "cache"
    names = [ds.name for ds in cfg.datasets]
    rasters = []
    for name in names:
        cache = cache_dir / f"{name}.smbr"
        if not cache.exists():
            raise ConfigError(f"no harmonized cache for dataset {name!r} in {cache_dir}; "
                              "run the harmonize command first")
        rasters.append(read_binary_raster(cache))
    return names, rasters


# -- commands ---------------------------------------------------------------------


def cmd_harmonize(args) -> int:
    cfg = load_pipeline_config(args.config)
    out = Path(args.out)
    cache_dir = out / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    spec = _country_grid(cfg)
    regions = read_admin_regions(cfg.regions_path)
    mask = build_country_mask(regions, spec)
    regions_sha = _sha256_file(cfg.regions_path)

    workers = args.threads if args.threads and args.threads > 0 else None
    results = {}
    if args.threads == 1:
        for ds in cfg.datasets:
            name, raster, stats, hit = _harmonize_one(ds, spec, mask, cache_dir, regions_sha)
            results[name] = (raster, stats, hit)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_harmonize_one, ds, spec, mask, cache_dir, regions_sha)
                       for ds in cfg.datasets]
            for fut in futures:
                name, raster, stats, hit = fut.result()
                results[name] = (raster, stats, hit)

    summary = {"country": cfg.country_code, "grid": _spec_key(spec),
               "mask_cells": mask.cell_count, "mask_area_km2": mask.area_km2,
               "datasets": []}
    for ds in cfg.datasets:
        raster, stats, hit = results[ds.name]
        dens = raster.count / mask.area_km2 if mask.area_km2 > 0 else None
        summary["datasets"].append({"name": ds.name, "kind": ds.kind,
                                    "count": raster.count, "density_per_km2": dens,
                                    "ingest": stats})
        print(f"{ds.name}: {raster.count} settled cells, "
              f"{dens:.4f} cells/km2" + (" (cache hit)" if hit else ""))
    write_json(summary, out / "harmonize_summary.json")
    return 0


def cmd_overlap(args) -> int:
    cfg = load_pipeline_config(args.config)
    if len(cfg.datasets) < 2:
        raise ConfigError("overlap needs at least 2 datasets")
    out = Path(args.out)
    names, rasters = _load_caches(cfg, out)
    regions = read_admin_regions(cfg.regions_path)
    mask = build_country_mask(regions, rasters[0].spec)

    report = compute_overlap_report(rasters, names, mask=mask)
    write_report(report, out / "overlap.json", "json")
    write_report(report, out / "overlap.csv", "csv")
    print(f"average overlap: {report.average_theta:.4f} "
          f"(upper limit {report.average_upper:.4f})")

    factors = None
    if args.factors:
        try:
            factors = [int(v) for v in args.factors.split(",")]
        except ValueError:
            raise ConfigError(f"--factors must be a comma list of integers, "
                              f"got {args.factors!r}") from None
    elif cfg.pyramid_factors:
        factors = list(cfg.pyramid_factors)
    if factors:
        reports = overlap_pyramid(rasters, names, factors, mask=mask)
        write_json([r.as_dict() for r in reports], out / "pyramid.json")
        header = reports[0].csv_header()
        rows = [r.csv_rows()[0] for r in reports]
        write_csv(out / "pyramid.csv", header, rows)
        for r in reports:
            print(f"factor {r.scale_factor}: theta={r.average_theta:.4f}")
    return 0


def cmd_zonal(args) -> int:
    cfg = load_pipeline_config(args.config)
    out = Path(args.out)
    names, rasters = _load_caches(cfg, out)
    regions = read_admin_regions(cfg.regions_path)
    table = zonal_overlap(rasters, names, regions)
    summary: dict = {"n_regions": len(table.rows)}
    if cfg.hdi_path:
        table = join_hdi(table, read_hdi_csv(cfg.hdi_path))
        try:
            r, p = hdi_association(table)
            summary["hdi_pearson_r"] = r
            summary["hdi_pearson_p"] = p
            print(f"HDI association: r={r:.4f}, p={p:.3g}")
        except ComputationError as exc:
            summary["hdi_pearson_r"] = None
            summary["hdi_note"] = str(exc)
    write_report(table, out / "zonal.csv", "csv")
    write_json(summary, out / "zonal_summary.json")
    print(f"{len(table.rows)} regions written")
    return 0


def cmd_features(args) -> int:
    cfg = load_pipeline_config(args.config)
    if len(cfg.datasets) < 3:
        raise ConfigError("feature building needs 3 datasets")
    if len(cfg.datasets) > 3:
        print("note: using the first three datasets for labeling", file=sys.stderr)
    missing = [k for k in ("rwi", "rwi_error", "nightlight", "ghsl")
               if k not in cfg.feature_paths]
    if missing:
        raise ConfigError(f"missing feature layers in config: {missing}")
    out = Path(args.out)
    names, rasters = _load_caches(cfg, out)
    x, y, z = rasters[:3]

    rwi = read_geotiff(cfg.feature_paths["rwi"])
    rwi_err = read_geotiff(cfg.feature_paths["rwi_error"])
    nightlight = read_geotiff(cfg.feature_paths["nightlight"])
    if cfg.ghsl_projection == "mollweide":
        ghsl = read_mollweide_geotiff(cfg.feature_paths["ghsl"], x.spec)
    else:
        ghsl = read_geotiff(cfg.feature_paths["ghsl"])

    table = build_table(x, y, z, rwi, rwi_err, nightlight, ghsl, cfg.country_code)
    table.save(out / "features.ftbl")
    if args.csv:
        table.to_csv(out / "features.csv")
    pos = float(table.label.mean()) if table.n_rows else 0.0
    write_json({"country": cfg.country_code, "rows": table.n_rows,
                "dropped_missing": table.dropped_missing, "positive_share": pos},
               out / "features_summary.json")
    print(f"{table.n_rows} rows ({table.dropped_missing} dropped), "
          f"positive share {pos:.4f}")
    return 0


def cmd_train(args) -> int:
    tables = [FeatureTable.load(p) for p in args.tables]
    table = FeatureTable.concat(tables) if len(tables) > 1 else tables[0]

    model_cfg = ModelConfig()
    if args.config:
        model_cfg = load_pipeline_config(args.config).model
    if args.seed is not None:
        model_cfg = dataclasses.replace(model_cfg, seed=args.seed)
    if args.subsample and table.n_rows > args.subsample:
        stream = SplitMix64(derive_seed(model_cfg.seed, "subsample"))
        keep = np.sort(stream.permutation(table.n_rows)[:args.subsample])
        table = FeatureTable(
            countries=table.countries,
            country_idx=table.country_idx[keep], cell_row=table.cell_row[keep],
            cell_col=table.cell_col[keep], label=table.label[keep],
            rwi=table.rwi[keep], rwi_error=table.rwi_error[keep],
            nightlight=table.nightlight[keep],
            settlement_class=table.settlement_class[keep],
            dropped_missing=table.dropped_missing)
        print(f"subsampled to {table.n_rows} rows")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train_model(table, model_cfg)
    write_json(result.as_dict(), out / "model.json")
    write_report(result, out / "odds_ratios.csv", "csv")
    print(f"F1 {result.f1_mean:.4f} [{result.f1_range[0]:.4f}; {result.f1_range[1]:.4f}], "
          f"balanced accuracy {result.balanced_accuracy_mean:.4f} "
          f"[{result.balanced_accuracy_range[0]:.4f}; {result.balanced_accuracy_range[1]:.4f}]")
    return 0


def cmd_report(args) -> int:
    cfg = load_pipeline_config(args.config)
    out = Path(args.out)
    zonal_path = out / "zonal.csv"
    model_path = out / "model.json"
    if not zonal_path.exists():
        raise ConfigError(f"{zonal_path} missing; run the zonal command first")
    if not model_path.exists():
        raise ConfigError(f"{model_path} missing; run the train command first")

    with open(zonal_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    names = [ds.name for ds in cfg.datasets]
    region_counts = [{n: int(row.get(f"count_{n}", 0) or 0) for n in names} for row in rows]
    theta_by_region = {row["region_id"]: (float(row["theta_avg"]) if row["theta_avg"] else None)
                       for row in rows}

    counts_scatter_svg(names, region_counts, out / "counts_scatter.svg")
    regions = read_admin_regions(cfg.regions_path)
    choropleth_svg(regions, theta_by_region, out / "zonal_choropleth.svg")
    model = json.loads(model_path.read_text(encoding="utf-8"))
    odds_ratio_svg(model["odds_ratios"], out / "odds_ratios.svg")
    print("wrote counts_scatter.svg, zonal_choropleth.svg, odds_ratios.svg")
    return 0


def _synth_country_config(base_seed: int, index: int, width: int, height: int) -> SynthConfig:
    """Per-country generator settings, a pure function of seed and index."""
    seed = derive_seed(base_seed, "country", index)
    u = SplitMix64(derive_seed(seed, "noise")).uniform(6)
    return SynthConfig(
        seed=seed,
        country_code=f"SY{index + 1}",
        width=width,
        height=height,
        origin_col=228_000 + 640 * index,
        origin_row=108_000,
        n_blobs=10 + index % 3,
        n_regions=2 + index % 3,
        footprints=Perturbation(dropout=0.04 + 0.08 * float(u[0]),
                                score_low=0.6, score_high=1.0),
        extents=Perturbation(dilation=1, dropout=0.05 * float(u[1]),
                             score_low=0.0, score_high=0.5),
        population=Perturbation(dropout=0.05 + 0.08 * float(u[2]),
                                offset=(int(u[3] * 2), int(u[4] * 2))),
        ghsl_projection="mollweide" if index == 1 else "lonlat",
    )


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i in range(args.countries):
        config = _synth_country_config(args.seed, i, args.size, args.size)
        country = generate_country(config)
        write_country(country, out / config.country_code)
        manifest.append({"country_code": config.country_code,
                         "config": out.joinpath(config.country_code, "pipeline.cfg").name,
                         "truth_cells": country.truth.count})
        print(f"{config.country_code}: truth {country.truth.count} cells, "
              f"{config.n_regions} regions")
    write_json({"seed": args.seed, "countries": manifest}, out / "manifest.json")
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="settlematch",
        description="Harmonize settlement datasets and quantify their agreement.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="pipeline config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (0 = auto); never changes output bytes")

    p = sub.add_parser("synth", help="generate synthetic countries")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--countries", type=int, default=6)
    p.add_argument("--size", type=int, default=128, help="grid side length in cells")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("harmonize", help="ingest, rasterize and mask each dataset")
    common(p)
    p.set_defaults(func=cmd_harmonize)

    p = sub.add_parser("overlap", help="overlap report and pyramid")
    common(p)
    p.add_argument("--factors", help="comma list of pyramid factors (default from config)")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("zonal", help="per-region overlap and HDI association")
    common(p)
    p.set_defaults(func=cmd_zonal)

    p = sub.add_parser("features", help="build the per-cell feature table")
    common(p)
    p.add_argument("--csv", action="store_true", help="also export features.csv")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="nested CV training and bootstrap odds ratios")
    p.add_argument("--tables", nargs="+", required=True, help="feature table caches")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="pipeline config providing the [model] section")
    p.add_argument("--seed", type=int, help="override the model seed")
    p.add_argument("--subsample", type=int, help="uniform row subsample size")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="SVG figures from saved outputs")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        _err(str(exc))
        return 2
    except FileNotFoundError as exc:
        _err(str(exc))
        return 2
    except SettlematchError as exc:
        _err(str(exc))
        return 1
    except OSError as exc:
        _err(str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
