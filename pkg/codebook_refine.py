"""Codebook refinement by contiguous greedy set cover over a discretized visibility range.

Candidates are steering directions with axis-aligned coverage regions. Along every
axis a region covers a contiguous index range of the grid, so the 1-D cover is an
interval cover and the 2-D cover works on rectangles of grid indices.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from array_model import (
    ArrayKind,
    Direction,
    PhaseShifterSpec,
    gain_matrix,
    geometry_fingerprint,
    manifold_matrix,
    quantize_steering,
    steering_for,
)
from coverage_analysis import (
    CoverageRegion,
    axis_bounds,
    axis_numeric_bounds,
    axis_params,
    delta_bounds,
    sine_half_widths,
)
from errors import ConfigError, EmptyVisibilityError, InvalidGeometryError, UncoverablePointError

logger = logging.getLogger(__name__)

GRID_ATOL_DEG = 1e-9
REGION_SOURCES = ("analytic", "numeric")
DEFAULT_NUMERIC_SCAN_STEP_DEG = 0.01
_VERIFY_CHUNK = 4096


def segment_runs(mask):
    """(start, end) index pairs of the True runs in a boolean array, end inclusive."""
    runs = []
    values = np.asarray(mask, dtype=bool)
    i = 0
    while i < len(values):
        if values[i]:
            start = i
            while i < len(values) and values[i]:
                i += 1
            runs.append((start, i - 1))
        else:
            i += 1
    return runs


@dataclass(frozen=True, eq=False)
class VisibilityGrid:
    """Uniform inclusive angle grid per axis; a URA grid is the Cartesian product."""

    axes: tuple
    steps_deg: tuple
    limits_deg: tuple

    @classmethod
    def build(cls, limits, steps):
        axes = []
        for (lo, hi), step in zip(limits, steps):
            if not step > 0:
                raise EmptyVisibilityError(f"grid step must be positive, got {step}")
            if hi < lo:
                raise EmptyVisibilityError(f"visibility range [{lo}, {hi}] deg is empty")
            if lo < -90 or hi > 90:
                raise EmptyVisibilityError(f"visibility range [{lo}, {hi}] deg leaves [-90, 90]")
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            axes.append(np.minimum(lo + step * np.arange(count), hi))
        if not axes:
            raise EmptyVisibilityError("visibility needs at least one axis")
        return cls(tuple(axes), tuple(float(s) for s in steps), tuple((float(lo), float(hi)) for lo, hi in limits))

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def empty_mask(self):
        return np.zeros(self.shape, dtype=bool)

    def angles_at(self, index):
        return tuple(float(axis[i]) for axis, i in zip(self.axes, np.atleast_1d(index)))

    def points(self):
        """Grid points in C order, shape (P,) for one axis and (P, 2) for two."""
        if self.ndim == 1:
            return self.axes[0].copy()
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class AxisCoverage:
    """Per-axis candidate centers, deviation bounds and the grid index range each covers."""

    centers: np.ndarray
    l_delta: np.ndarray
    u_delta: np.ndarray
    clamped_lo: np.ndarray
    clamped_hi: np.ndarray
    lo_idx: np.ndarray
    hi_idx: np.ndarray

    @classmethod
    def from_bounds(cls, axis_grid, centers, l_delta, u_delta, clamped_lo=None, clamped_hi=None):
        centers = np.asarray(centers, dtype=float)
        l_delta = np.asarray(l_delta, dtype=float)
        u_delta = np.asarray(u_delta, dtype=float)
        clamped_lo = np.zeros(centers.size, bool) if clamped_lo is None else np.asarray(clamped_lo, bool)
        clamped_hi = np.zeros(centers.size, bool) if clamped_hi is None else np.asarray(clamped_hi, bool)
        lo_idx = np.searchsorted(axis_grid, centers + l_delta - GRID_ATOL_DEG, side="left")
        hi_idx = np.searchsorted(axis_grid, centers + u_delta + GRID_ATOL_DEG, side="right") - 1
        keep = lo_idx <= hi_idx
        order = np.lexsort((centers[keep], lo_idx[keep]))
        return cls(
            *(a[keep][order] for a in (centers, l_delta, u_delta, clamped_lo, clamped_hi, lo_idx, hi_idx))
        )

    def __len__(self):
        return self.centers.size


@dataclass(frozen=True)
class Candidate:
    direction: Direction
    region: CoverageRegion


@dataclass(frozen=True, eq=False)
class CandidateSet:
    geometry: object
    threshold: object
    grid: VisibilityGrid
    axes: tuple
    region_source: str = "analytic"

    def __len__(self):
        return int(np.prod([len(a) for a in self.axes]))

    def _index(self, index):
        index = tuple(np.atleast_1d(index))
        if len(index) != len(self.axes):
            raise IndexError(f"candidate index needs {len(self.axes)} component(s)")
        return index

    def direction(self, index):
        index = self._index(index)
        return Direction.from_angles([float(a.centers[i]) for a, i in zip(self.axes, index)])

    def region(self, index):
        index = self._index(index)
        return CoverageRegion(
            center_deg=tuple(float(a.centers[i]) for a, i in zip(self.axes, index)),
            l_delta_deg=tuple(float(a.l_delta[i]) for a, i in zip(self.axes, index)),
            u_delta_deg=tuple(float(a.u_delta[i]) for a, i in zip(self.axes, index)),
            clamped=tuple((bool(a.clamped_lo[i]), bool(a.clamped_hi[i])) for a, i in zip(self.axes, index)),
        )

    def __iter__(self):
        for index in np.ndindex(*[len(a) for a in self.axes]):
            yield Candidate(self.direction(index), self.region(index))

    def on_grid(self, grid):
        """Same candidate regions indexed against another grid."""
        if grid is self.grid:
            return self
        axes = tuple(
            AxisCoverage.from_bounds(g, a.centers, a.l_delta, a.u_delta, a.clamped_lo, a.clamped_hi)
            for g, a in zip(grid.axes, self.axes)
        )
        return CandidateSet(self.geometry, self.threshold, grid, axes, self.region_source)


def _axis_regions(n, d, centers, half_width, axis_min_ratio, region_source, scan_step_deg):
    if region_source == "analytic":
        return axis_bounds(centers, half_width)
    rows = [axis_numeric_bounds(n, d, c, axis_min_ratio, scan_step_deg) for c in centers]
    lower, upper, clamped_lo, clamped_hi = (np.array(col) for col in zip(*rows))
    return lower, upper, clamped_lo, clamped_hi


def build_candidates(
    geom,
    grid,
    threshold,
    candidate_step_deg=None,
    region_source="analytic",
    numeric_scan_step_deg=DEFAULT_NUMERIC_SCAN_STEP_DEG,
):
    """One candidate per candidate angle (the grid angles by default) with its coverage region."""
    if region_source not in REGION_SOURCES:
        raise ConfigError("grid.region_source", f"must be one of {REGION_SOURCES}, got {region_source!r}")
    expected_ndim = 2 if geom.kind is ArrayKind.URA else 1
    if grid.ndim != expected_ndim:
        raise InvalidGeometryError(f"a {geom.kind.value} needs a {expected_ndim}-axis grid, got {grid.ndim}")
    if grid.size == 0:
        raise EmptyVisibilityError("visibility grid is empty")

    if candidate_step_deg is None:
        candidate_axes = grid.axes
    else:
        if any(candidate_step_deg > s + GRID_ATOL_DEG for s in grid.steps_deg):
            raise ConfigError(
                "grid.candidate_step_deg",
                f"{candidate_step_deg} deg is coarser than the grid step {min(grid.steps_deg)} deg",
            )
        candidate_axes = VisibilityGrid.build(grid.limits_deg, [candidate_step_deg] * grid.ndim).axes

    half_widths = sine_half_widths(geom, threshold)
    # a rectangle is certified when every axis factor keeps gamma_f^(-1/ndim)
    axis_min_ratio = threshold.min_ratio ** (1 / grid.ndim)
    axes = []
    for (n, d), centers, width, axis_grid in zip(axis_params(geom), candidate_axes, half_widths, grid.axes):
        lower, upper, clamped_lo, clamped_hi = _axis_regions(
            n, d, centers, width, axis_min_ratio, region_source, numeric_scan_step_deg
        )
        axes.append(AxisCoverage.from_bounds(axis_grid, centers, lower, upper, clamped_lo, clamped_hi))
    candidates = CandidateSet(geom, threshold, grid, tuple(axes), region_source)
    logger.info(
        "built %d %s candidates over a %s grid (%d points)",
        len(candidates), region_source, "x".join(map(str, grid.shape)), grid.size,
    )
    return candidates


@dataclass(frozen=True, eq=False)
class CodebookEntry:
    steering: object
    direction: Direction
    region: CoverageRegion
    newly_covered: int = 0


@dataclass(frozen=True, eq=False)
class RefinedCodebook:
    entries: tuple
    geometry: object
    threshold: object
    grid_steps_deg: tuple = ()
    visibility_deg: tuple = ()
    region_source: str = "analytic"
    initial_grid_size: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    @property
    def fingerprint(self):
        return geometry_fingerprint(self.geometry)

    def directions(self):
        """Pointing angles, shape (K, ndim)."""
        ndim = 2 if self.geometry.is_planar else 1
        if not self.entries:
            return np.empty((0, ndim))
        return np.array([e.direction.angles for e in self.entries], dtype=float)

    def weights_matrix(self, quantize=None):
        """Steering weights stacked as rows (K, N), quantized when a spec is given."""
        if not self.entries:
            return np.empty((0, self.geometry.n_elements), dtype=complex)
        spec = quantize or PhaseShifterSpec()
        return np.stack([quantize_steering(e.steering, spec).weights for e in self.entries])

    @classmethod
    def from_directions(cls, geom, threshold, directions, **kwargs):
        """Codebook of the optimal steering vectors for the given pointing directions."""
        entries = []
        for angles in directions:
            direction = Direction.from_angles(np.atleast_1d(angles))
            entries.append(
                CodebookEntry(steering_for(geom, direction), direction, delta_bounds(geom, direction, threshold))
            )
        return cls(tuple(entries), geom, threshold, **kwargs)


def _entry(candidates, index, newly_covered):
    direction = candidates.direction(index)
    return CodebookEntry(
        steering_for(candidates.geometry, direction), direction, candidates.region(index), int(newly_covered)
    )


def _codebook(candidates, grid, entries):
    codebook = RefinedCodebook(
        entries=tuple(entries),
        geometry=candidates.geometry,
        threshold=candidates.threshold,
        grid_steps_deg=grid.steps_deg,
        visibility_deg=grid.limits_deg,
        region_source=candidates.region_source,
        initial_grid_size=grid.size,
    )
    logger.info("refined codebook: %d entries from %d grid directions", len(codebook), grid.size)
    return codebook


def greedy_cover_1d(candidates, grid=None):
    """Interval cover: repeatedly take the candidate that covers the first uncovered
    angle and reaches furthest along the consecutive uncovered points after it."""
    grid = candidates.grid if grid is None else grid
    candidates = candidates.on_grid(grid)
    if grid.ndim != 1:
        raise InvalidGeometryError("greedy_cover_1d needs a one-axis grid")
    axis = candidates.axes[0]
    uncovered = ~grid.empty_mask()
    entries = []
    while uncovered.any():
        i, run_end = segment_runs(uncovered)[0]
        contains = (axis.lo_idx <= i) & (axis.hi_idx >= i)
        if not contains.any():
            raise UncoverablePointError(grid.angles_at(i))
        reach = np.where(contains, np.minimum(axis.hi_idx, run_end) - i + 1, -1)
        best = np.flatnonzero(reach == reach.max())
        pick = int(best[np.argmin(axis.centers[best])])
        uncovered[axis.lo_idx[pick]:axis.hi_idx[pick] + 1] = False
        entries.append(_entry(candidates, (pick,), reach[pick]))
        logger.debug("picked %.4f deg covering grid %d..%d", axis.centers[pick], i, i + reach[pick] - 1)
    return _codebook(candidates, grid, entries)


def _summed_area(mask):
    table = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    table[1:, 1:] = mask.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    return table


def greedy_cover_2d(candidates, grid=None):
    """Rectangle cover: take the first uncovered (i, j) in row-major order and the
    candidate containing it that leaves the fewest uncovered points."""
    grid = candidates.grid if grid is None else grid
    candidates = candidates.on_grid(grid)
    if grid.ndim != 2:
        raise InvalidGeometryError("greedy_cover_2d needs a two-axis grid")
    ax, ay = candidates.axes
    uncovered = ~grid.empty_mask()
    entries = []
    while uncovered.any():
        i, j = divmod(int(np.flatnonzero(uncovered.ravel())[0]), grid.shape[1])
        rows = np.flatnonzero((ax.lo_idx <= i) & (ax.hi_idx >= i))
        cols = np.flatnonzero((ay.lo_idx <= j) & (ay.hi_idx >= j))
        if rows.size == 0 or cols.size == 0:
            raise UncoverablePointError(grid.angles_at((i, j)))
        table = _summed_area(uncovered)
        r0, r1 = ax.lo_idx[rows][:, None], ax.hi_idx[rows][:, None] + 1
        c0, c1 = ay.lo_idx[cols][None, :], ay.hi_idx[cols][None, :] + 1
        newly = table[r1, c1] - table[r0, c1] - table[r1, c0] + table[r0, c0]
        remaining = int(table[-1, -1]) - newly
        flat = int(np.argmin(remaining))
        l, m = int(rows[flat // cols.size]), int(cols[flat % cols.size])
        uncovered[ax.lo_idx[l]:ax.hi_idx[l] + 1, ay.lo_idx[m]:ay.hi_idx[m] + 1] = False
        entries.append(_entry(candidates, (l, m), newly.ravel()[flat]))
        logger.debug("picked (%.3f, %.3f) deg, %d points left", ax.centers[l], ay.centers[m], remaining.ravel()[flat])
    return _codebook(candidates, grid, entries)


def refine(candidates, grid=None):
    """Greedy cover of the visibility grid, 1-D or 2-D by the candidate grid."""
    if candidates.grid.ndim == 1:
        return greedy_cover_1d(candidates, grid)
    return greedy_cover_2d(candidates, grid)


@dataclass(frozen=True, eq=False)
class CoverReport:
    gamma_db: float
    ratios: np.ndarray
    best_index: np.ndarray
    points: np.ndarray
    quantized_bits: int = None

    @property
    def n_points(self):
        return int(self.ratios.size)

    @property
    def min_ratio(self):
        return float(self.ratios.min()) if self.ratios.size else 0.0

    @property
    def argmin_angles(self):
        k = int(np.argmin(self.ratios))
        return tuple(float(a) for a in np.atleast_1d(self.points[k]))

    @property
    def fraction_covered(self):
        """Share of grid points whose best ratio is >= 1/gamma_f - 1e-9."""
        return float(np.mean(self.ratios >= 10 ** (-self.gamma_db / 10) - 1e-9))

    @property
    def is_complete(self):
        return self.fraction_covered == 1.0

    def fraction_within(self, extra_db):
        """Share of grid points with gap <= gamma + extra_db."""
        return float(np.mean(self.ratios >= 10 ** (-(self.gamma_db + extra_db) / 10) - 1e-12))

    def uncovered_runs(self):
        """Runs of uncovered grid indices (flat C order)."""
        return segment_runs(self.ratios < 10 ** (-self.gamma_db / 10) - 1e-9)

    def to_dict(self):
        return {
            "quantized_bits": self.quantized_bits,
            "n_points": self.n_points,
            "min_ratio": self.min_ratio,
            "min_ratio_db": float(10 * np.log10(self.min_ratio)) if self.min_ratio > 0 else None,
            "argmin_deg": list(self.argmin_angles),
            "fraction_covered": self.fraction_covered,
            "fraction_within_0.1db": self.fraction_within(0.1),
        }


def verify_cover(codebook, geom, grid, threshold, quantize=None):
    """Best exact gain ratio over the codebook at every grid point, by direct sum."""
    points = grid.points()
    n_points = grid.size
    if len(codebook) == 0:
        logger.warning("verifying an empty codebook")
        return CoverReport(threshold.gamma_db, np.zeros(n_points), np.full(n_points, -1), points)
    weights = codebook.weights_matrix(quantize)
    ratios = np.empty(n_points)
    best = np.empty(n_points, dtype=int)
    for start in range(0, n_points, _VERIFY_CHUNK):
        chunk = points[start:start + _VERIFY_CHUNK]
        gains = gain_matrix(manifold_matrix(geom, chunk), weights) / geom.max_gain
        best[start:start + len(chunk)] = np.argmax(gains, axis=1)
        ratios[start:start + len(chunk)] = gains.max(axis=1)
    bits = int(quantize.bits) if quantize is not None and quantize.is_quantized else None
    report = CoverReport(threshold.gamma_db, ratios, best, points, bits)
    logger.info(
        "verification%s: min ratio %.6f at %s deg, %.4f%% of %d points covered",
        f" ({bits}-bit)" if bits else "", report.min_ratio, report.argmin_angles,
        100 * report.fraction_covered, n_points,
    )
    runs = report.uncovered_runs()
    if runs:
        logger.warning("%d uncovered run(s), first at flat index %d..%d", len(runs), *runs[0])
    return report
