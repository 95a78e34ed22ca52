"""Overlap metrics against enumeration oracles and the bound chain."""

import numpy as np
import pytest
from scipy import stats as scipy_stats

from settlematch import (
    AlignmentError,
    BinaryRaster,
    ComputationError,
    GridSpec,
    average_overlap,
    compute_overlap_report,
    density,
    jaccard,
    overlap_pyramid,
    pearson,
    upper_limit,
)
from settlematch.harmonize import build_country_mask
from settlematch.synth import (
    oracle_average_overlap,
    oracle_count,
    oracle_jaccard,
    oracle_upper_limit,
    random_raster,
)
from tests.test_harmonize import spec_at, strip_region


def raster_from_cells(spec, cells):
    arr = np.zeros((spec.height, spec.width), bool)
    for r, c in cells:
        arr[r, c] = True
    return BinaryRaster.from_bool(spec, arr)


class TestJaccard:
    def test_identity_is_one(self):
        r = random_raster(1, spec_at(8, 8), density=0.4, ensure_nonempty=True)
        assert jaccard(r, r) == 1.0

    def test_disjoint_is_zero(self):
        spec = spec_at(4, 4)
        x = raster_from_cells(spec, [(0, 0), (0, 1)])
        y = raster_from_cells(spec, [(2, 2), (3, 3)])
        assert jaccard(x, y) == 0.0

    def test_one_third_case(self):
        spec = spec_at(4, 4)
        x = raster_from_cells(spec, [(0, 0), (0, 1)])
        y = raster_from_cells(spec, [(0, 0), (1, 0)])
        assert jaccard(x, y) == pytest.approx(1 / 3)

    def test_both_empty_defined_as_one(self):
        spec = spec_at(4, 4)
        assert jaccard(BinaryRaster.zeros(spec), BinaryRaster.zeros(spec)) == 1.0

    def test_symmetry_and_grid_check(self):
        x = random_raster(2, spec_at(8, 8), density=0.3)
        y = random_raster(3, spec_at(8, 8), density=0.3)
        assert jaccard(x, y) == jaccard(y, x)
        with pytest.raises(AlignmentError):
            jaccard(x, random_raster(4, spec_at(8, 8, col0=228008)))

    def test_matches_enumeration_oracle(self):
        spec = spec_at(16, 16)
        for seed in range(50):
            x = random_raster(7 * seed, spec, density=0.35)
            y = random_raster(7 * seed + 1, spec, density=0.35)
            assert jaccard(x, y) == oracle_jaccard(x.to_bool(), y.to_bool())


class TestAverageOverlap:
    def test_mean_of_pairwise_values(self):
        spec = spec_at(16, 16)
        rs = [random_raster(s, spec, density=0.3, ensure_nonempty=True) for s in (1, 2, 3)]
        want = (jaccard(rs[0], rs[1]) + jaccard(rs[0], rs[2]) + jaccard(rs[1], rs[2])) / 3
        assert average_overlap(rs) == pytest.approx(want, rel=1e-15)

    def test_two_rasters_equals_jaccard(self):
        spec = spec_at(8, 8)
        x, y = random_raster(5, spec), random_raster(6, spec)
        assert average_overlap([x, y]) == jaccard(x, y)

    def test_three_random_rasters_match_oracle(self):
        spec = spec_at(16, 16)
        for seed in range(20):
            rs = [random_raster(seed * 3 + k, spec, density=0.3) for k in range(3)]
            want = oracle_average_overlap([r.to_bool() for r in rs])
            assert average_overlap(rs) == pytest.approx(want, rel=1e-15)

    def test_fewer_than_two_rejected(self):
        with pytest.raises(ComputationError):
            average_overlap([random_raster(0, spec_at(4, 4))])

    def test_average_within_pairwise_min_max(self):
        spec = spec_at(16, 16)
        for seed in range(20):
            rs = [random_raster(seed * 5 + k, spec, density=0.3, ensure_nonempty=True)
                  for k in range(4)]
            pairw = [jaccard(rs[i], rs[j]) for i in range(4) for j in range(i + 1, 4)]
            avg = average_overlap(rs)
            assert min(pairw) - 1e-12 <= avg <= max(pairw) + 1e-12


class TestUpperLimit:
    def test_100_vs_1000_gives_point_one(self):
        spec = spec_at(40, 40)
        cells = np.zeros((40, 40), bool)
        cells.reshape(-1)[:100] = True
        x = BinaryRaster.from_bool(spec, cells)
        cells2 = np.zeros((40, 40), bool)
        cells2.reshape(-1)[: 1000] = True
        y = BinaryRaster.from_bool(spec, cells2)
        assert upper_limit(x, y) == 0.1

    def test_equal_counts_give_one(self):
        spec = spec_at(8, 8)
        x = raster_from_cells(spec, [(0, 0), (1, 1)])
        y = raster_from_cells(spec, [(5, 5), (6, 6)])
        assert upper_limit(x, y) == 1.0

    def test_matches_count_oracle(self):
        spec = spec_at(16, 16)
        for seed in range(30):
            x = random_raster(seed, spec, density=0.2, ensure_nonempty=True)
            y = random_raster(seed + 1000, spec, density=0.5, ensure_nonempty=True)
            assert upper_limit(x, y) == oracle_upper_limit(x.to_bool(), y.to_bool())

    def test_both_empty_rejected(self):
        spec = spec_at(4, 4)
        with pytest.raises(ComputationError):
            upper_limit(BinaryRaster.zeros(spec), BinaryRaster.zeros(spec))

    def test_bound_chain_holds_on_random_pairs(self):
        spec = spec_at(24, 24)
        for seed in range(200):
            x = random_raster(seed, spec, density=0.1 + (seed % 7) * 0.1,
                              ensure_nonempty=True)
            y = random_raster(seed + 5000, spec, density=0.1 + (seed % 5) * 0.15,
                              ensure_nonempty=True)
            j = jaccard(x, y)
            u = upper_limit(x, y)
            assert 0.0 <= j <= u <= 1.0


class TestDensity:
    def test_empty_raster_zero_density(self):
        spec = spec_at(8, 8)
        mask = build_country_mask([strip_region(spec, 0, 8)], spec)
        assert density(BinaryRaster.zeros(spec), mask) == 0.0

    def test_equatorial_100x100_mask(self):
        per_deg = 1200
        spec = GridSpec.from_lattice(228000, 90 * per_deg, 3.0, 100, 100)
        mask = build_country_mask([strip_region(spec, 0, 100)], spec)
        cells = np.zeros((100, 100), bool)
        cells.reshape(-1)[:100] = True
        got = density(BinaryRaster.from_bool(spec, cells), mask)
        assert got == pytest.approx(100 / (1e4 * 0.0085875), rel=1e-3)

    def test_density_linear_in_count(self):
        spec = spec_at(10, 10)
        mask = build_country_mask([strip_region(spec, 0, 10)], spec)
        single = raster_from_cells(spec, [(0, 0)])
        double = raster_from_cells(spec, [(0, 0), (5, 5)])
        assert density(double, mask) == pytest.approx(2 * density(single, mask), rel=1e-12)


class TestPearson:
    def test_exact_linearity(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        r, p = pearson(xs, [2 * x + 1 for x in xs])
        assert r == pytest.approx(1.0)
        assert p == pytest.approx(0.0, abs=1e-12)

    def test_anti_linearity(self):
        xs = [0.5, 1.5, 2.5]
        r, _ = pearson(xs, [-x for x in xs])
        assert r == pytest.approx(-1.0)

    def test_hand_evaluated_formula(self):
        xs = np.array([1.0, 2.0, 3.0, 4.0])
        ys = np.array([1.0, 3.0, 2.0, 5.0])
        # direct product-moment evaluation
        dx = xs - xs.mean()
        dy = ys - ys.mean()
        want = float((dx * dy).sum() / np.sqrt((dx * dx).sum() * (dy * dy).sum()))
        r, p = pearson(xs, ys)
        assert r == pytest.approx(want, rel=1e-12)
        ref_r, ref_p = scipy_stats.pearsonr(xs, ys)
        assert r == pytest.approx(ref_r, rel=1e-12)
        assert p == pytest.approx(ref_p, rel=1e-9)

    def test_zero_variance_rejected(self):
        with pytest.raises(ComputationError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_p_value_accuracy_against_reference(self):
        stream = np.random.default_rng(11)
        for n in (5, 12, 40):
            xs = stream.normal(size=n)
            ys = stream.normal(size=n) + 0.4 * xs
            r, p = pearson(xs, ys)
            ref_r, ref_p = scipy_stats.pearsonr(xs, ys)
            assert r == pytest.approx(float(ref_r), rel=1e-12)
            assert p == pytest.approx(float(ref_p), abs=1e-12)


class TestPyramid:
    def test_identical_rasters_all_factors_one(self):
        spec = spec_at(16, 16)
        r = random_raster(8, spec, density=0.3, ensure_nonempty=True)
        reports = overlap_pyramid([r, r], ["a", "b"], [1, 2, 4])
        assert all(rep.average_theta == 1.0 for rep in reports)

    def test_checker_offset_jumps_to_one_at_factor_two(self):
        # one raster holds the even cells of a checkerboard, the other the
        # odd cells: at native scale they are disjoint, at factor 2 both
        # saturate every block
        spec = spec_at(16, 16, col0=228000, row0=108000)
        rr, cc = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
        even = (rr + cc) % 2 == 0
        x = BinaryRaster.from_bool(spec, even)
        y = BinaryRaster.from_bool(spec, ~even)
        reports = overlap_pyramid([x, y], ["a", "b"], [1, 2])
        assert reports[0].average_theta == 0.0
        assert reports[1].average_theta == 1.0

    def test_factor_list_must_start_at_one(self):
        r = random_raster(0, spec_at(8, 8))
        with pytest.raises(ValueError):
            overlap_pyramid([r, r], ["a", "b"], [2, 4])

    def test_single_factor_equals_plain_report(self):
        spec = spec_at(16, 16)
        x = random_raster(10, spec, density=0.3, ensure_nonempty=True)
        y = random_raster(11, spec, density=0.3, ensure_nonempty=True)
        [rep] = overlap_pyramid([x, y], ["a", "b"], [1])
        assert rep.average_theta == average_overlap([x, y])

    def test_pyramid_theta_not_asserted_monotone(self):
        # documented counterexample: a matched pair of cells fuses into one
        # block while the unmatched singletons keep their own blocks, so
        # aggregation LOWERS overlap (0.5 at factor 1, 1/3 at factor 2)
        spec = spec_at(8, 8, col0=228000, row0=108000)
        x = raster_from_cells(spec, [(0, 0), (0, 1), (4, 4)])
        y = raster_from_cells(spec, [(0, 0), (0, 1), (6, 6)])
        reports = overlap_pyramid([x, y], ["a", "b"], [1, 2])
        assert reports[0].average_theta == pytest.approx(0.5)
        assert reports[1].average_theta == pytest.approx(1 / 3)
        assert reports[1].average_theta < reports[0].average_theta


class TestOverlapReport:
    def test_report_fields_consistent(self):
        spec = spec_at(16, 16)
        rs = [random_raster(s, spec, density=0.3, ensure_nonempty=True) for s in (1, 2, 3)]
        mask = build_country_mask([strip_region(spec, 0, 16)], spec)
        rep = compute_overlap_report(rs, ["a", "b", "c"], mask=mask)
        assert rep.average_theta == pytest.approx(
            sum(rep.pairwise_theta.values()) / 3, rel=1e-15)
        for pair, theta in rep.pairwise_theta.items():
            assert theta <= rep.pairwise_upper[pair] + 1e-15
        for name, r in zip(["a", "b", "c"], rs):
            assert rep.counts[name] == r.count
            assert rep.density_per_km2[name] == pytest.approx(density(r, mask))

    def test_oracle_counts_in_report(self):
        spec = spec_at(16, 16)
        rs = [random_raster(s + 50, spec, density=0.4) for s in range(2)]
        rep = compute_overlap_report(rs, ["x", "y"])
        assert rep.counts["x"] == oracle_count(rs[0].to_bool())
        assert rep.counts["y"] == oracle_count(rs[1].to_bool())
