"""Angular coverage of a steering vector under a bounded array-gain loss.

The gain ratio D of a beam steered to theta and a wave arriving from theta + delta
depends only on the phase deviation z = 2pi (d/lambda)(sin(theta + delta) - sin(theta)),
through the normalized squared Dirichlet kernel. A URA factorizes into one kernel
per axis in (theta_x, theta_y) coordinates.
"""
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from array_model import ArrayKind, Direction, array_gain, manifold, steering_for
from errors import AngleDomainError, InvalidGeometryError, InvalidThresholdError, RootRegimeWarning

logger = logging.getLogger(__name__)

VISIBILITY_LIMIT_DEG = 90.0
SINGULAR_TOL = 1e-9
# above 10*log10(2*pi) dB the ULA root equation can have more than three roots
THREE_ROOT_LIMIT_DB = 10 * math.log10(2 * math.pi)
SCAN_STEP_RAD = 0.01
BISECT_XTOL = 1e-15
BISECT_MAXITER = 200
DEFAULT_SCAN_STEP_DEG = 1e-4
_SCAN_CHUNK = 20000


@dataclass(frozen=True)
class ThresholdSpec:
    """Allowed gain loss gamma_db and its linear factor gamma_f = 10^(gamma/10)."""

    gamma_db: float

    def __post_init__(self):
        if not self.gamma_db > 0 or not math.isfinite(self.gamma_db):
            raise InvalidThresholdError(f"gamma must be a positive number of dB, got {self.gamma_db}")
        if self.gamma_db > THREE_ROOT_LIMIT_DB:
            warnings.warn(
                f"gamma = {self.gamma_db} dB is above {THREE_ROOT_LIMIT_DB:.2f} dB, "
                "the coverage root equation may have extra roots",
                RootRegimeWarning,
                stacklevel=2,
            )

    @classmethod
    def from_factor(cls, gamma_f):
        if not gamma_f > 1:
            raise InvalidThresholdError(f"gamma_f must exceed 1, got {gamma_f}")
        return cls(10 * math.log10(gamma_f))

    @property
    def gamma_f(self):
        return 10 ** (self.gamma_db / 10)

    @property
    def min_ratio(self):
        return 1 / self.gamma_f


@dataclass(frozen=True)
class AlphaStar:
    value: float
    kind: ArrayKind
    residual: float


@dataclass(frozen=True)
class DeviationQuery:
    """Per-axis steering angles, deviations and the resulting phase deviations z."""

    thetas_deg: tuple
    deltas_deg: tuple
    z: tuple

    @classmethod
    def build(cls, geom, direction, deltas_deg):
        deltas = tuple(float(d) for d in np.atleast_1d(deltas_deg))
        thetas = direction.angles
        if len(deltas) != len(thetas):
            raise AngleDomainError(f"{len(thetas)} steering angle(s) but {len(deltas)} deviation(s)")
        for theta, delta in zip(thetas, deltas):
            if abs(theta + delta) > VISIBILITY_LIMIT_DEG:
                raise AngleDomainError(f"theta + delta = {theta + delta} deg is outside [-90, 90]")
        z = tuple(
            float(phase_deviation(d, theta, delta))
            for (_, d), theta, delta in zip(axis_params(geom), thetas, deltas)
        )
        return cls(thetas, deltas, z)


@dataclass(frozen=True)
class CoverageRegion:
    """Deviation bounds around center_deg, one (lower, upper) pair per axis.

    clamped holds (lower, upper) flags for edges pinned to the +-90 deg boundary.
    """

    center_deg: tuple
    l_delta_deg: tuple
    u_delta_deg: tuple
    clamped: tuple

    def __post_init__(self):
        for lower, upper in zip(self.l_delta_deg, self.u_delta_deg):
            if not lower <= 0 <= upper:
                raise ValueError(f"coverage bounds ({lower}, {upper}) do not enclose zero")

    @property
    def ndim(self):
        return len(self.center_deg)

    @property
    def lower_deg(self):
        return tuple(c + l for c, l in zip(self.center_deg, self.l_delta_deg))

    @property
    def upper_deg(self):
        return tuple(c + u for c, u in zip(self.center_deg, self.u_delta_deg))

    def width_deg(self, axis=0):
        return self.u_delta_deg[axis] - self.l_delta_deg[axis]

    def contains(self, angles_deg, atol=1e-9):
        angles = np.atleast_1d(angles_deg)
        return all(lo - atol <= a <= hi + atol for a, lo, hi in zip(angles, self.lower_deg, self.upper_deg))

    def within(self, other, atol=1e-9):
        """True when this region lies inside other (same center)."""
        return all(
            ol - atol <= l and u <= ou + atol
            for l, u, ol, ou in zip(self.l_delta_deg, self.u_delta_deg, other.l_delta_deg, other.u_delta_deg)
        )


def axis_params(geom):
    """(element count, d/lambda) for each steering axis."""
    if geom.kind is ArrayKind.ULA:
        return [(geom.n1, geom.d1_over_lambda)]
    return [(geom.n1, geom.d1_over_lambda), (geom.n2, geom.d2_over_lambda)]


def phase_deviation(d_over_lambda, theta_deg, delta_deg):
    """z = 2pi (d/lambda)(sin(theta + delta) - sin(theta)), written stably for small delta."""
    theta = np.radians(theta_deg)
    delta = np.radians(delta_deg)
    return 2 * np.pi * d_over_lambda * 2 * np.cos(theta + delta / 2) * np.sin(delta / 2)


def dirichlet_ratio(z, n):
    """(sin(n z / 2) / (n sin(z / 2)))^2, exactly 1 at multiples of 2pi."""
    z = np.asarray(z, dtype=float)
    wrapped = np.mod(z + np.pi, 2 * np.pi) - np.pi
    half = wrapped / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (np.sin(n * half) / (n * np.sin(half))) ** 2
    ratio = np.where(np.abs(wrapped) < SINGULAR_TOL, 1.0, ratio)
    return float(ratio) if ratio.ndim == 0 else ratio


def degradation_ula(geom, theta_deg, delta_deg):
    """Achievable-to-maximum gain ratio D for a ULA beam at theta and a wave at theta + delta."""
    if geom.kind is not ArrayKind.ULA:
        raise InvalidGeometryError(f"degradation_ula needs a ULA, got {geom.kind.value}")
    query = DeviationQuery.build(geom, Direction.linear(theta_deg), delta_deg)
    return dirichlet_ratio(query.z[0], geom.n1)


def degradation_ura(geom, theta_x, theta_y, delta_x, delta_y):
    """Product of the two per-axis Dirichlet ratios of a URA in (theta_x, theta_y)."""
    if geom.kind is not ArrayKind.URA:
        raise InvalidGeometryError(f"degradation_ura needs a URA, got {geom.kind.value}")
    query = DeviationQuery.build(geom, Direction.planar(theta_x, theta_y), (delta_x, delta_y))
    return dirichlet_ratio(query.z[0], geom.n1) * dirichlet_ratio(query.z[1], geom.n2)


def degradation(geom, direction, deltas_deg):
    if geom.kind is ArrayKind.ULA:
        return degradation_ula(geom, direction.theta_deg, np.atleast_1d(deltas_deg)[0])
    return degradation_ura(geom, *direction.angles, *deltas_deg)


def direct_gain_ratio(geom, direction, deviated):
    """Brute-force |a(deviated) . w(direction)|^2 / (N beta^2)."""
    return array_gain(manifold(geom, deviated), steering_for(geom, direction)) / geom.max_gain


def degradation_curve(geom, theta_deg, deltas_deg, axis=0):
    """D along one axis over a deviation sweep, NaN where theta + delta leaves [-90, 90]."""
    n, d = axis_params(geom)[axis]
    deltas = np.asarray(deltas_deg, dtype=float)
    ratio = dirichlet_ratio(phase_deviation(d, theta_deg, deltas), n)
    return np.where(np.abs(theta_deg + deltas) <= VISIBILITY_LIMIT_DEG, ratio, np.nan)


def _ula_root_residual(alpha, gamma_f):
    return 1 - math.cos(alpha) - alpha ** 2 / (2 * gamma_f)


def alpha_star_ula(threshold):
    """Smallest positive root of 1 - cos(a) - a^2 / (2 gamma_f) = 0.

    For a != 0 the equation is equivalent to sinc^2(a / 2) = 1 / gamma_f, which has
    no double root at zero. That form is scanned outward in 0.01 rad steps for the
    first sign change and then bisected.
    """
    gamma_f = threshold.gamma_f
    if not gamma_f > 1:
        raise InvalidThresholdError(f"gamma_f must exceed 1, got {gamma_f}")

    def scaled(alpha):
        return np.sinc(alpha / (2 * np.pi)) ** 2 - 1 / gamma_f

    # sinc^2(a/2) <= 4 / a^2, so the root lies below 2 sqrt(gamma_f)
    upper = 2 * math.sqrt(gamma_f) + SCAN_STEP_RAD
    grid = np.arange(1, math.ceil(upper / SCAN_STEP_RAD) + 1) * SCAN_STEP_RAD
    first = int(np.argmax(scaled(grid) <= 0))
    lo = 0.0 if first == 0 else float(grid[first - 1])
    hi = float(grid[first])
    value = bisect(scaled, lo, hi, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER)
    logger.debug("ULA alpha* = %.12f for gamma_f = %.6f", value, gamma_f)
    return AlphaStar(value, ArrayKind.ULA, _ula_root_residual(value, gamma_f))


def alpha_star_ura(threshold):
    """Unique root of sin(a) / a = gamma_f^(-1/4) in (0, pi); sin(a)/a decreases strictly there."""
    gamma_f = threshold.gamma_f
    if not gamma_f > 1:
        raise InvalidThresholdError(f"gamma_f must exceed 1, got {gamma_f}")
    target = gamma_f ** -0.25

    def residual(alpha):
        return np.sinc(alpha / np.pi) - target

    value = bisect(residual, 0.0, math.pi, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER)
    return AlphaStar(value, ArrayKind.URA, float(residual(value)))


def axis_bounds(thetas_deg, half_width_sine):
    """arcsin(sin(theta) -+ w) - theta, clamped to the +-90 deg boundary."""
    thetas = np.asarray(thetas_deg, dtype=float)
    sines = np.sin(np.radians(thetas))
    lo_arg = sines - half_width_sine
    hi_arg = sines + half_width_sine
    lower = np.degrees(np.arcsin(np.clip(lo_arg, -1.0, 1.0))) - thetas
    upper = np.degrees(np.arcsin(np.clip(hi_arg, -1.0, 1.0))) - thetas
    return np.minimum(lower, 0.0), np.maximum(upper, 0.0), lo_arg < -1, hi_arg > 1


def sine_half_widths(geom, threshold):
    """Per-axis half width of the covered interval in sin(theta) space."""
    if geom.kind is ArrayKind.ULA:
        alpha = alpha_star_ula(threshold).value
        return [alpha / (2 * math.pi * geom.d1_over_lambda * geom.n1)]
    alpha = alpha_star_ura(threshold).value
    return [alpha / (math.pi * d * n) for n, d in axis_params(geom)]


def _region(thetas, widths):
    rows = [axis_bounds(theta, w) for theta, w in zip(thetas, widths)]
    return CoverageRegion(
        center_deg=tuple(float(t) for t in thetas),
        l_delta_deg=tuple(float(r[0]) for r in rows),
        u_delta_deg=tuple(float(r[1]) for r in rows),
        clamped=tuple((bool(r[2]), bool(r[3])) for r in rows),
    )


def delta_bounds_ula(geom, theta_deg, threshold):
    """Closed-form coverage region of a ULA beam steered to theta_deg."""
    if geom.kind is not ArrayKind.ULA:
        raise InvalidGeometryError(f"delta_bounds_ula needs a ULA, got {geom.kind.value}")
    direction = Direction.linear(theta_deg)
    return _region(direction.angles, sine_half_widths(geom, threshold))


def delta_bounds_ura(geom, theta_x, theta_y, threshold):
    """Per-axis closed-form coverage region of a URA beam."""
    if geom.kind is not ArrayKind.URA:
        raise InvalidGeometryError(f"delta_bounds_ura needs a URA, got {geom.kind.value}")
    direction = Direction.planar(theta_x, theta_y)
    return _region(direction.angles, sine_half_widths(geom, threshold))


def delta_bounds(geom, direction, threshold):
    if geom.kind is ArrayKind.ULA:
        return delta_bounds_ula(geom, direction.theta_deg, threshold)
    return delta_bounds_ura(geom, *direction.angles, threshold)


def _scan_edge(n, d, theta, sign, min_ratio, step):
    """Walk delta = sign * k * step away from zero while the axis ratio stays >= min_ratio."""
    limit = VISIBILITY_LIMIT_DEG - sign * theta
    last_k = int(math.floor(limit / step + 1e-9))
    start = 0
    while start <= last_k:
        k = np.arange(start, min(start + _SCAN_CHUNK, last_k + 1))
        deltas = sign * k * step
        failing = np.flatnonzero(dirichlet_ratio(phase_deviation(d, theta, deltas), n) < min_ratio)
        if failing.size:
            edge = k[failing[0]] - 1
            return sign * max(edge, 0) * step, False
        start += _SCAN_CHUNK
    return sign * limit, True


def axis_numeric_bounds(n, d_over_lambda, theta_deg, min_ratio, scan_step_deg=DEFAULT_SCAN_STEP_DEG):
    """Exact (lower, upper, lower_clamped, upper_clamped) extent of one axis factor."""
    if not scan_step_deg > 0:
        raise ValueError(f"scan step must be positive, got {scan_step_deg}")
    lower, lower_clamped = _scan_edge(n, d_over_lambda, theta_deg, -1, min_ratio, scan_step_deg)
    upper, upper_clamped = _scan_edge(n, d_over_lambda, theta_deg, +1, min_ratio, scan_step_deg)
    return min(float(lower), 0.0), max(float(upper), 0.0), lower_clamped, upper_clamped


def numeric_coverage(geom, direction, threshold, scan_step_deg=DEFAULT_SCAN_STEP_DEG):
    """Exact coverage extent per axis by scanning the true gain ratio outward from zero.

    For a URA each axis is scanned with the other deviation held at zero.
    """
    rows = [
        axis_numeric_bounds(n, d, theta, threshold.min_ratio, scan_step_deg)
        for (n, d), theta in zip(axis_params(geom), direction.angles)
    ]
    logger.debug("numeric coverage at %s deg: %s", direction.angles, [(r[0], r[1]) for r in rows])
    return CoverageRegion(
        center_deg=tuple(direction.angles),
        l_delta_deg=tuple(r[0] for r in rows),
        u_delta_deg=tuple(r[1] for r in rows),
        clamped=tuple((r[2], r[3]) for r in rows),
    )


@dataclass(frozen=True)
class AlphaDiscrepancy:
    n: int
    gamma_f: float
    alpha_star: float
    alpha_exact: float

    @property
    def alpha_gap(self):
        return self.alpha_exact - self.alpha_star

    @property
    def z_gap(self):
        return self.alpha_gap / self.n


def alpha_discrepancy(n, threshold):
    """Gap between the exact main-lobe root of D(z) = 1/gamma_f (in a = n z) and the ULA alpha*."""
    if n < 2:
        raise InvalidGeometryError("the discrepancy needs at least two elements")
    alpha = alpha_star_ula(threshold).value
    min_ratio = threshold.min_ratio

    def excess(a):
        return dirichlet_ratio(a / n, n) - min_ratio

    exact = bisect(excess, alpha, 2 * math.pi, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER)
    return AlphaDiscrepancy(n, threshold.gamma_f, alpha, exact)
