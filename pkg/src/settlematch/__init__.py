"""Settlement-dataset harmonization and agreement toolkit.

Aligns building-footprint, settlement-extent, and population-raster
products onto one 3 arc-second grid, measures their agreement (Jaccard
overlap, upper limits, densities, multiscale pyramids, zonal statistics),
and fits a regularized logistic regression explaining where they agree.
"""

from .agreement import (
    OverlapReport,
    average_overlap,
    compute_overlap_report,
    density,
    jaccard,
    overlap_pyramid,
    pearson,
    upper_limit,
)
from .errors import (
    AlignmentError,
    ComputationError,
    ConfigError,
    FormatError,
    SettlematchError,
)
from .featurize import (
    FeatureTable,
    SettlementClass,
    build_table,
    density_split_ratio,
    label_cells,
    sample_feature,
)
from .grid import (
    BinaryRaster,
    CategoricalRaster,
    GridSpec,
    NumericRaster,
    cell_area_km2,
    count_settled,
    window,
)
from .harmonize import (
    CountryMask,
    binarize,
    block_or_downscale,
    build_country_mask,
    mask_to_country,
    upscale_1s_to_3s,
)
from .mlcore import (
    FittedModel,
    ModelConfig,
    ModelResult,
    balanced_accuracy,
    bootstrap_odds_ratios,
    f1_score,
    fit,
    group_kfold,
    loss_and_gradient,
    nested_cv,
    stratified_kfold,
    train_model,
)
from .rasterize import RasterizePolicy, RasterizeStats, rasterize_extents, rasterize_footprints
from .synth import Perturbation, SynthConfig, generate_country, write_country
from .zonal import ZonalTable, hdi_association, join_hdi, zonal_overlap

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "BinaryRaster", "CategoricalRaster", "ComputationError",
    "ConfigError", "CountryMask", "FeatureTable", "FittedModel", "FormatError",
    "GridSpec", "ModelConfig", "ModelResult", "NumericRaster", "OverlapReport",
    "Perturbation", "RasterizePolicy", "RasterizeStats", "SettlematchError",
    "SettlementClass", "SynthConfig", "ZonalTable", "average_overlap",
    "balanced_accuracy", "binarize", "block_or_downscale", "bootstrap_odds_ratios",
    "build_country_mask", "build_table", "cell_area_km2", "compute_overlap_report",
    "count_settled", "density", "density_split_ratio", "f1_score", "fit",
    "generate_country", "group_kfold", "hdi_association", "jaccard", "join_hdi",
    "label_cells", "loss_and_gradient", "mask_to_country", "nested_cv",
    "overlap_pyramid", "pearson", "rasterize_extents", "rasterize_footprints",
    "sample_feature", "stratified_kfold", "train_model", "upper_limit",
    "upscale_1s_to_3s", "window", "zonal_overlap",
]
