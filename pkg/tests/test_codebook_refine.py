"""
Codebook refinement tests.

 Group 1 - visibility grid and candidates
 Group 2 - 1-D greedy cover (prefix property, optimality, determinism)
 Group 3 - 2-D greedy cover
 Group 4 - verification and refined sizes for the 25.1 GHz arrays
"""
import itertools
import math

import numpy as np
import pytest

from array_model import ArrayGeometry, ArrayKind, Direction, PhaseShifterSpec
from codebook_refine import (
    AxisCoverage,
    CandidateSet,
    RefinedCodebook,
    VisibilityGrid,
    build_candidates,
    greedy_cover_1d,
    greedy_cover_2d,
    refine,
    segment_runs,
    verify_cover,
)
from coverage_analysis import ThresholdSpec, degradation
from errors import ConfigError, EmptyVisibilityError, UncoverablePointError

ULA4 = ArrayGeometry.from_physical(ArrayKind.ULA, 4, 1, 0.00515, 25.1)
URA4 = ArrayGeometry.from_physical(ArrayKind.URA, 4, 4, 0.00515, 25.1)
ULA8 = ArrayGeometry.ula(8, 0.5)
GAMMA3 = ThresholdSpec(3.0)
GAMMAS = [1.0, 2.0, 3.0, 5.0]
ULA_GRID = VisibilityGrid.build([(-60.0, 60.0)], [0.1])
URA_GRID = VisibilityGrid.build([(-60.0, 60.0), (-60.0, 60.0)], [0.5, 0.5])

# refined sizes reported for the hardware arrays, keyed by gamma in dB
REPORTED_ULA_SIZES = {1.0: 11, 2.0: 9, 3.0: 6, 5.0: 5}
REPORTED_URA_SIZES = {1.0: 20, 2.0: 17, 3.0: 14, 5.0: 10}


def _interval_set(geom, n_points, intervals):
    """Candidates on an integer-degree grid 0..n_points-1 from (center, lo, hi) index triples."""
    grid = VisibilityGrid.build([(0.0, float(n_points - 1))], [1.0])
    centers = [float(c) for c, _, _ in intervals]
    axis = AxisCoverage.from_bounds(
        grid.axes[0], centers, [lo - c for c, lo, _ in intervals], [hi - c for c, _, hi in intervals]
    )
    return CandidateSet(geom, GAMMA3, grid, (axis,)), grid


def _random_cover(rng, n_points, min_len, max_len, extra):
    intervals = []
    start = 0
    while start < n_points:
        end = min(start + int(rng.integers(min_len, max_len + 1)) - 1, n_points - 1)
        intervals.append((int(rng.integers(start, end + 1)), start, end))
        start = end + 1
    for _ in range(extra):
        c = int(rng.integers(0, n_points))
        intervals.append((c, max(0, c - int(rng.integers(0, max_len))), min(n_points - 1, c + int(rng.integers(0, max_len)))))
    return intervals


def _min_cover_size(n_points, sets):
    target = set(range(n_points))
    for r in range(1, len(sets) + 1):
        for combo in itertools.combinations(sets, r):
            if set().union(*combo) >= target:
                return r
    raise AssertionError("instance is infeasible")


# ---------------------------------------------------------------- Group 1


def test_grid_is_uniform_and_inclusive():
    axis = ULA_GRID.axes[0]
    assert ULA_GRID.size == 1201
    assert axis[0] == -60.0 and axis[-1] == pytest.approx(60.0, abs=1e-9)
    assert np.all(np.abs(np.diff(axis) - 0.1) < 1e-9)
    assert URA_GRID.shape == (241, 241)
    assert URA_GRID.points().shape == (241 * 241, 2)


def test_empty_grid_rejected():
    with pytest.raises(EmptyVisibilityError):
        VisibilityGrid.build([(10.0, -10.0)], [0.1])
    with pytest.raises(EmptyVisibilityError):
        VisibilityGrid.build([(-10.0, 10.0)], [0.0])


def test_one_candidate_per_grid_angle():
    candidates = build_candidates(ULA4, ULA_GRID, GAMMA3)
    assert len(candidates) == 1201
    starts = candidates.axes[0].lo_idx
    assert np.all(np.diff(starts) >= 0)


def test_candidate_regions_are_centered_on_their_direction():
    candidates = build_candidates(ULA4, ULA_GRID, GAMMA3)
    for index in (0, 300, 600, 1200):
        direction, region = candidates.direction(index), candidates.region(index)
        assert region.contains(direction.angles)
        assert degradation(ULA4, direction, [0.0]) == 1.0


def test_edge_candidates_are_wider_than_broadside():
    candidates = build_candidates(ULA4, ULA_GRID, GAMMA3)
    widths = {round(c.direction.theta_deg, 6): c.region.width_deg() for c in candidates}
    assert widths[-60.0] > widths[0.0]
    assert widths[60.0] > widths[0.0]


def test_candidate_step_must_not_exceed_grid_step():
    with pytest.raises(ConfigError, match="candidate_step_deg"):
        build_candidates(ULA4, ULA_GRID, GAMMA3, candidate_step_deg=0.5)
    finer = build_candidates(ULA4, VisibilityGrid.build([(-10.0, 10.0)], [1.0]), GAMMA3, candidate_step_deg=0.5)
    assert len(finer) == 41


def test_unknown_region_source_rejected():
    with pytest.raises(ConfigError, match="region_source"):
        build_candidates(ULA4, ULA_GRID, GAMMA3, region_source="exact")


def test_segment_runs():
    assert segment_runs([False, True, True, False, True]) == [(1, 2), (4, 4)]
    assert segment_runs([]) == []
    assert segment_runs([True] * 3) == [(0, 2)]


# ---------------------------------------------------------------- Group 2


def test_single_covering_candidate_gives_one_entry():
    candidates, grid = _interval_set(ULA8, 21, [(10, 0, 20), (5, 3, 8)])
    codebook = greedy_cover_1d(candidates, grid)
    assert len(codebook) == 1
    assert codebook[0].direction.theta_deg == 10.0
    assert codebook[0].newly_covered == 21


def test_ties_go_to_smaller_angle():
    candidates, grid = _interval_set(ULA8, 10, [(6, 0, 9), (3, 0, 9)])
    assert greedy_cover_1d(candidates, grid)[0].direction.theta_deg == 3.0


def test_uncoverable_point_is_named():
    candidates, grid = _interval_set(ULA8, 11, [(2, 0, 4), (8, 6, 10)])
    with pytest.raises(UncoverablePointError) as info:
        greedy_cover_1d(candidates, grid)
    assert info.value.angles == (5.0,)
    assert "5.0000" in str(info.value)
    assert info.value.exit_code == 3


def test_greedy_prefix_property():
    codebook = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, GAMMA3))
    axis = ULA_GRID.axes[0]
    starts = [e.region.lower_deg[0] for e in codebook]
    ends = [e.region.upper_deg[0] for e in codebook]
    assert all(a < b for a, b in zip(starts, starts[1:]))
    assert starts[0] <= axis[0] + 1e-9
    # each pick contains the first angle its predecessors left uncovered
    for previous_end, start in zip(ends, starts[1:]):
        first_uncovered = axis[np.searchsorted(axis, previous_end + 1e-9, side="right")]
        assert start <= first_uncovered + 1e-9


def test_no_entry_is_redundant():
    codebook = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, GAMMA3))
    axis = ULA_GRID.axes[0]
    spans = [(e.region.lower_deg[0] - 1e-9, e.region.upper_deg[0] + 1e-9) for e in codebook]
    assert all(e.newly_covered > 0 for e in codebook)
    for k in range(len(spans)):
        others = spans[:k] + spans[k + 1:]
        covered = np.zeros(axis.size, bool)
        for lo, hi in others:
            covered |= (axis >= lo) & (axis <= hi)
        assert not covered.all()


def test_greedy_matches_exhaustive_minimum():
    rng = np.random.default_rng(99)
    for _ in range(200):
        n_points = int(rng.integers(5, 26))
        intervals = _random_cover(rng, n_points, 3, 8, 0)
        intervals += _random_cover(rng, n_points, 1, 6, 0)[: 12 - len(intervals)]
        intervals = intervals[:12]
        sets = [set(range(lo, hi + 1)) for _, lo, hi in intervals]
        candidates, grid = _interval_set(ULA8, n_points, intervals)
        assert len(greedy_cover_1d(candidates, grid)) == _min_cover_size(n_points, sets)


def test_greedy_is_deterministic():
    first = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, GAMMA3))
    second = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, GAMMA3))
    assert np.array_equal(first.directions(), second.directions())
    assert np.array_equal(first.weights_matrix(), second.weights_matrix())


def test_larger_threshold_never_grows_codebook():
    sizes = [len(greedy_cover_1d(build_candidates(ULA4, ULA_GRID, ThresholdSpec(g)))) for g in np.arange(0.5, 7.01, 0.5)]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_greedy_accepts_another_grid():
    candidates = build_candidates(ULA4, ULA_GRID, GAMMA3)
    coarse = VisibilityGrid.build([(-30.0, 30.0)], [1.0])
    codebook = greedy_cover_1d(candidates, coarse)
    assert verify_cover(codebook, ULA4, coarse, GAMMA3).is_complete


# ---------------------------------------------------------------- Group 3


def test_single_point_grid_gives_one_entry():
    grid = VisibilityGrid.build([(0.0, 0.0), (0.0, 0.0)], [0.5, 0.5])
    codebook = greedy_cover_2d(build_candidates(URA4, grid, GAMMA3))
    assert len(codebook) == 1
    assert codebook[0].direction.angles == (0.0, 0.0)


def test_two_dimensional_cover_is_complete_on_small_grid():
    grid = VisibilityGrid.build([(-20.0, 20.0), (-10.0, 30.0)], [1.0, 1.0])
    codebook = refine(build_candidates(URA4, grid, GAMMA3))
    assert sum(e.newly_covered for e in codebook) == grid.size
    report = verify_cover(codebook, URA4, grid, GAMMA3)
    assert report.is_complete


def test_two_dimensional_uncoverable_pair_is_named():
    grid = VisibilityGrid.build([(0.0, 4.0), (0.0, 4.0)], [1.0, 1.0])
    ax = AxisCoverage.from_bounds(grid.axes[0], [1.0, 4.0], [-1.0, 0.0], [1.0, 0.0])
    ay = AxisCoverage.from_bounds(grid.axes[1], [2.0], [-2.0], [2.0])
    with pytest.raises(UncoverablePointError) as info:
        greedy_cover_2d(CandidateSet(URA4, GAMMA3, grid, (ax, ay)))
    assert info.value.angles == (3.0, 0.0)


def test_two_dimensional_greedy_within_log_factor_of_optimum():
    rng = np.random.default_rng(123)
    for _ in range(60):
        m1, m2 = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        ix = _random_cover(rng, m1, 2, 3, 1)[:3]
        iy = _random_cover(rng, m2, 2, 3, 1)[:3]
        if set().union(*[range(lo, hi + 1) for _, lo, hi in ix]) != set(range(m1)):
            continue
        if set().union(*[range(lo, hi + 1) for _, lo, hi in iy]) != set(range(m2)):
            continue
        grid = VisibilityGrid.build([(0.0, float(m1 - 1)), (0.0, float(m2 - 1))], [1.0, 1.0])
        axes = tuple(
            AxisCoverage.from_bounds(g, [float(c) for c, _, _ in iv], [lo - c for c, lo, _ in iv], [hi - c for c, _, hi in iv])
            for g, iv in zip(grid.axes, (ix, iy))
        )
        codebook = greedy_cover_2d(CandidateSet(URA4, GAMMA3, grid, axes))
        rectangles = [
            {(i, j) for i in range(xl, xh + 1) for j in range(yl, yh + 1)}
            for (_, xl, xh), (_, yl, yh) in itertools.product(ix, iy)
        ]
        universe = {(i, j) for i in range(m1) for j in range(m2)}
        best = next(
            r for r in range(1, len(rectangles) + 1)
            if any(set().union(*c) >= universe for c in itertools.combinations(rectangles, r))
        )
        assert len(codebook) <= best * (1 + math.log(grid.size))


# ---------------------------------------------------------------- Group 4


def test_empty_codebook_verifies_to_zero():
    empty = RefinedCodebook((), ULA4, GAMMA3)
    report = verify_cover(empty, ULA4, ULA_GRID, GAMMA3)
    assert report.fraction_covered == 0.0
    assert report.min_ratio == 0.0
    assert np.all(report.best_index == -1)


def test_verification_reports_worst_point():
    codebook = RefinedCodebook.from_directions(ULA4, GAMMA3, [[0.0]])
    report = verify_cover(codebook, ULA4, ULA_GRID, GAMMA3)
    assert report.fraction_covered < 1.0
    assert abs(report.argmin_angles[0]) > 20.0
    assert report.uncovered_runs()


@pytest.mark.parametrize("gamma_db", GAMMAS)
def test_ula_refinement_is_complete_and_small(gamma_db, record_property):
    threshold = ThresholdSpec(gamma_db)
    codebook = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, threshold))
    report = verify_cover(codebook, ULA4, ULA_GRID, threshold)
    record_property("refined_size", len(codebook))
    record_property("reported_size", REPORTED_ULA_SIZES[gamma_db])
    assert report.is_complete
    assert report.min_ratio >= 1 / threshold.gamma_f - 1e-9
    assert len(codebook) < ULA_GRID.size
    quantized = verify_cover(codebook, ULA4, ULA_GRID, threshold, quantize=PhaseShifterSpec(10))
    assert quantized.fraction_within(0.1) >= 0.99


def test_ula_sizes_non_increasing_over_thresholds():
    sizes = [len(greedy_cover_1d(build_candidates(ULA4, ULA_GRID, ThresholdSpec(g)))) for g in GAMMAS]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_numeric_regions_never_need_more_entries():
    analytic = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, GAMMA3))
    numeric = greedy_cover_1d(build_candidates(ULA4, ULA_GRID, GAMMA3, region_source="numeric"))
    assert len(numeric) <= len(analytic)
    assert numeric.region_source == "numeric"
    assert verify_cover(numeric, ULA4, ULA_GRID, GAMMA3).is_complete


@pytest.mark.slow
@pytest.mark.parametrize("gamma_db", GAMMAS)
def test_ura_refinement_is_complete_and_small(gamma_db, record_property):
    threshold = ThresholdSpec(gamma_db)
    codebook = greedy_cover_2d(build_candidates(URA4, URA_GRID, threshold))
    record_property("refined_size", len(codebook))
    record_property("reported_size", REPORTED_URA_SIZES[gamma_db])
    report = verify_cover(codebook, URA4, URA_GRID, threshold)
    assert report.is_complete
    assert len(codebook) < URA_GRID.size
    quantized = verify_cover(codebook, URA4, URA_GRID, threshold, quantize=PhaseShifterSpec(10))
    assert quantized.fraction_within(0.1) >= 0.99


@pytest.mark.slow
def test_ura_larger_threshold_needs_no_more_entries():
    small = greedy_cover_2d(build_candidates(URA4, URA_GRID, ThresholdSpec(1.0)))
    large = greedy_cover_2d(build_candidates(URA4, URA_GRID, ThresholdSpec(5.0)))
    assert len(large) <= len(small)


@pytest.mark.slow
@pytest.mark.parametrize("region_source", ["analytic", "numeric"])
@pytest.mark.parametrize("visibility_deg", [45.0, 60.0])
@pytest.mark.parametrize("d_over_lambda", [0.4307, 0.5])
def test_refined_sizes_across_configurations(d_over_lambda, visibility_deg, region_source, record_property):
    limits = (-visibility_deg, visibility_deg)
    ula_grid = VisibilityGrid.build([limits], [0.1])
    ura_grid = VisibilityGrid.build([limits, limits], [0.5, 0.5])
    ula = ArrayGeometry.ula(4, d_over_lambda)
    ura = ArrayGeometry.ura(4, 4, d_over_lambda)
    ula_sizes, ura_sizes = [], []
    for gamma_db in GAMMAS:
        threshold = ThresholdSpec(gamma_db)
        ula_sizes.append(len(greedy_cover_1d(build_candidates(ula, ula_grid, threshold, region_source=region_source))))
        ura_sizes.append(len(greedy_cover_2d(build_candidates(ura, ura_grid, threshold, region_source=region_source))))
    matched = sum(
        abs(size - reported[g]) <= 2
        for sizes, reported in ((ula_sizes, REPORTED_ULA_SIZES), (ura_sizes, REPORTED_URA_SIZES))
        for g, size in zip(GAMMAS, sizes)
    )
    record_property("ula_sizes", ula_sizes)
    record_property("ura_sizes", ura_sizes)
    record_property("cells_within_two_of_reported", matched)
    assert max(ula_sizes) < ula_grid.size and max(ura_sizes) < ura_grid.size
    assert all(a >= b for a, b in zip(ula_sizes, ula_sizes[1:]))
    assert ura_sizes[-1] <= ura_sizes[0]


def test_ura_numeric_regions_stay_certified():
    grid = VisibilityGrid.build([(-30.0, 30.0), (-30.0, 30.0)], [2.0, 2.0])
    codebook = greedy_cover_2d(build_candidates(URA4, grid, GAMMA3, region_source="numeric", numeric_scan_step_deg=0.05))
    assert verify_cover(codebook, URA4, grid, GAMMA3).is_complete


def test_from_directions_builds_optimal_entries():
    codebook = RefinedCodebook.from_directions(URA4, GAMMA3, [(0.0, 0.0), (20.0, -10.0)])
    assert len(codebook) == 2
    assert codebook[1].direction == Direction.planar(20.0, -10.0)
    assert codebook.weights_matrix().shape == (2, 16)
