"""Overlap metrics between binary settlement rasters.

The agreement measure between two layers X and Y is the Jaccard index
over settled cells, theta = |X n Y| / |X u Y|; unsettled cells never enter
the calculation. For more than two layers the average of all pairwise
values summarizes total agreement, and min(|X|,|Y|)/max(|X|,|Y|) bounds
the overlap attainable given the two layers' sizes. Intersections and
unions run as one fused pass of bitwise ops and popcounts over the packed
64-bit words.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import betainc

from .errors import AlignmentError, ComputationError
from .grid import BinaryRaster, count_settled, popcount, row_areas_km2
from .harmonize import CountryMask, block_or_downscale

log = logging.getLogger(__name__)


def _check_same_grid(x: BinaryRaster, y: BinaryRaster) -> None:
    if not x.spec.matches(y.spec):
        raise AlignmentError("rasters are on different grids")


def intersection_union_counts(x: BinaryRaster, y: BinaryRaster) -> tuple[int, int]:
    """(|X n Y|, |X u Y|) in one pass over the packed bit words."""
    _check_same_grid(x, y)
    inter = popcount(x.bits & y.bits)
    union = popcount(x.bits | y.bits)
    return inter, union


def jaccard(x: BinaryRaster, y: BinaryRaster) -> float:
    """Jaccard overlap |X n Y| / |X u Y| of two aligned rasters.

    Two empty rasters agree totally: the 0/0 case is defined as 1 and
    logged, so windowed sub-regions never crash the pipeline.
    """
    inter, union = intersection_union_counts(x, y)
    if union == 0:
        log.warning("jaccard of two empty rasters defined as 1.0")
        return 1.0
    return inter / union


def average_overlap(rasters: list[BinaryRaster]) -> float:
    """Mean of the Jaccard values over all unordered raster pairs."""
    if len(rasters) < 2:
        raise ComputationError(f"need at least 2 rasters, got {len(rasters)}")
    thetas = [jaccard(x, y) for x, y in combinations(rasters, 2)]
    return sum(thetas) / len(thetas)


def upper_limit(x: BinaryRaster, y: BinaryRaster) -> float:
    """Best Jaccard achievable given the two settled-cell counts.

    min(|X|,|Y|) / max(|X|,|Y|): the overlap reached when the smaller
    raster nests entirely inside the larger one.
    """
    _check_same_grid(x, y)
    cx, cy = count_settled(x), count_settled(y)
    if cx == 0 and cy == 0:
        raise ComputationError("upper limit undefined for two empty rasters")
    return min(cx, cy) / max(cx, cy)


def density(r: BinaryRaster, mask: CountryMask) -> float:
    """Settled cells per square kilometre of masked area."""
    if not r.spec.matches(mask.spec):
        raise AlignmentError("mask grid does not match raster grid")
    if mask.area_km2 <= 0.0:
        raise ComputationError("mask has zero area")
    return count_settled(r) / mask.area_km2


def pearson(xs, ys) -> tuple[float, float]:
    """Product-moment correlation with a two-sided p-value.

    The p-value comes from the exact t transform with n-2 degrees of
    freedom, evaluated through the regularized incomplete beta function.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d sequences of equal length")
    n = x.size
    if n < 3:
        raise ComputationError(f"need at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ComputationError("zero variance in an input sequence")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    t2 = df * r * r / (1.0 - r * r)
    p = float(betainc(df / 2.0, 0.5, df / (df + t2)))
    return r, p


@dataclass(frozen=True)
class OverlapReport:
    """Pairwise and average overlap for a set of named rasters."""

    dataset_names: list[str]
    pairwise_theta: dict[tuple[str, str], float]
    average_theta: float
    pairwise_upper: dict[tuple[str, str], float]
    average_upper: float
    counts: dict[str, int]
    density_per_km2: dict[str, float] = field(default_factory=dict)
    scale_factor: int = 1

    def as_dict(self) -> dict:
        return {
            "datasets": list(self.dataset_names),
            "scale_factor": self.scale_factor,
            "theta": {f"{a}|{b}": v for (a, b), v in self.pairwise_theta.items()},
            "theta_average": self.average_theta,
            "theta_upper": {f"{a}|{b}": v for (a, b), v in self.pairwise_upper.items()},
            "theta_upper_average": self.average_upper,
            "counts": dict(self.counts),
            "density_per_km2": dict(self.density_per_km2),
        }

    def csv_header(self) -> list[str]:
        pairs = list(self.pairwise_theta)
        return (["scale_factor", "theta_average", "theta_upper_average"]
                + [f"theta_{a}_{b}" for a, b in pairs]
                + [f"theta_upper_{a}_{b}" for a, b in pairs]
                + [f"count_{n}" for n in self.dataset_names]
                + [f"density_{n}" for n in self.dataset_names])

    def csv_rows(self) -> list[list]:
        pairs = list(self.pairwise_theta)
        return [[self.scale_factor, self.average_theta, self.average_upper]
                + [self.pairwise_theta[p] for p in pairs]
                + [self.pairwise_upper[p] for p in pairs]
                + [self.counts[n] for n in self.dataset_names]
                + [self.density_per_km2.get(n) for n in self.dataset_names]]


def compute_overlap_report(rasters: list[BinaryRaster], names: list[str],
                           mask: CountryMask | None = None,
                           scale_factor: int = 1) -> OverlapReport:
    """Assemble the full overlap report for a set of aligned rasters.

    Pairs where both rasters are empty record theta and theta_upper as 1
    (total agreement of nothing) instead of failing, with a log line.
    """
    if len(rasters) < 2:
        raise ComputationError(f"need at least 2 rasters, got {len(rasters)}")
    if len(rasters) != len(names):
        raise ValueError("one name per raster required")
    for r in rasters[1:]:
        _check_same_grid(rasters[0], r)
    counts = {n: count_settled(r) for n, r in zip(names, rasters)}
    pairwise: dict[tuple[str, str], float] = {}
    uppers: dict[tuple[str, str], float] = {}
    for (na, ra), (nb, rb) in combinations(zip(names, rasters), 2):
        pairwise[(na, nb)] = jaccard(ra, rb)
        if counts[na] == 0 and counts[nb] == 0:
            log.warning("upper limit of two empty rasters (%s, %s) recorded as 1.0", na, nb)
            uppers[(na, nb)] = 1.0
        else:
            uppers[(na, nb)] = upper_limit(ra, rb)
    densities = {}
    if mask is not None:
        densities = {n: density(r, mask) for n, r in zip(names, rasters)}
    return OverlapReport(
        dataset_names=list(names),
        pairwise_theta=pairwise,
        average_theta=sum(pairwise.values()) / len(pairwise),
        pairwise_upper=uppers,
        average_upper=sum(uppers.values()) / len(uppers),
        counts=counts,
        density_per_km2=densities,
        scale_factor=scale_factor,
    )


def aggregate_mask(mask: CountryMask, factor: int) -> CountryMask:
    """Block-OR a country mask to a coarser pyramid level."""
    coarse = block_or_downscale(BinaryRaster(mask.spec, mask.mask), factor)
    inside = coarse.to_bool()
    area = float((inside.sum(axis=1) * row_areas_km2(coarse.spec)).sum())
    return CountryMask(coarse.spec, coarse.bits, mask.country_code, area)


def overlap_pyramid(rasters: list[BinaryRaster], names: list[str],
                    factors: list[int], mask: CountryMask | None = None) -> list[OverlapReport]:
    """One overlap report per aggregation factor.

    Factors must be ascending and start at 1; each level aggregates the
    original rasters (and mask, when given) by block-OR before measuring.
    """
    if not factors or factors[0] != 1 or sorted(factors) != list(factors):
        raise ValueError(f"factors must be ascending and start at 1, got {factors}")
    reports = []
    for f in factors:
        coarse = [block_or_downscale(r, f) for r in rasters]
        cmask = aggregate_mask(mask, f) if mask is not None else None
        reports.append(compute_overlap_report(coarse, names, mask=cmask, scale_factor=f))
    return reports
