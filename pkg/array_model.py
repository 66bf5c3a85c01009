"""Phased-array primitives: manifolds, steering vectors, phase quantization, gain.

Angles are degrees at every public interface and radians inside. Spacings are
stored as d/lambda. The URA element index is n = m1 * N2 + m2 (0-based), i.e.
np.kron(v1, v2) with the vertical index varying fastest.
"""
import hashlib
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from errors import (
    AngleDomainError,
    DegenerateManifoldError,
    DimensionError,
    GratingLobeWarning,
    InvalidGeometryError,
)

SPEED_OF_LIGHT = 299_792_458.0
UNIT_MODULUS_ATOL = 1e-12


class ArrayKind(str, Enum):
    ULA = "ULA"
    URA = "URA"


def max_grating_free_spacing(max_steer_deg):
    """Largest d/lambda without grating lobes when steering up to max_steer_deg."""
    return 1.0 / (1.0 + abs(math.sin(math.radians(max_steer_deg))))


@dataclass(frozen=True)
class ArrayGeometry:
    kind: ArrayKind
    n1: int
    n2: int = 1
    d1_over_lambda: float = 0.5
    d2_over_lambda: float = None
    path_gain: float = 1.0

    def __post_init__(self):
        try:
            kind = ArrayKind(self.kind)
        except ValueError:
            raise InvalidGeometryError(f"unknown array kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if self.d2_over_lambda is None:
            object.__setattr__(self, "d2_over_lambda", self.d1_over_lambda)
        if int(self.n1) != self.n1 or self.n1 < 1 or int(self.n2) != self.n2 or self.n2 < 1:
            raise InvalidGeometryError(f"element counts must be positive integers, got {self.n1}x{self.n2}")
        object.__setattr__(self, "n1", int(self.n1))
        object.__setattr__(self, "n2", int(self.n2))
        if kind is ArrayKind.ULA and self.n2 != 1:
            raise InvalidGeometryError(f"a ULA has n2 = 1, got {self.n2}")
        if not self.d1_over_lambda > 0 or not self.d2_over_lambda > 0:
            raise InvalidGeometryError("element spacing d/lambda must be positive")
        if not self.path_gain > 0:
            raise InvalidGeometryError("path gain must be positive")

    @classmethod
    def ula(cls, n, d_over_lambda=0.5, path_gain=1.0):
        return cls(ArrayKind.ULA, n, 1, d_over_lambda, d_over_lambda, path_gain)

    @classmethod
    def ura(cls, n1, n2, d1_over_lambda=0.5, d2_over_lambda=None, path_gain=1.0):
        return cls(ArrayKind.URA, n1, n2, d1_over_lambda, d2_over_lambda, path_gain)

    @classmethod
    def from_physical(cls, kind, n1, n2, spacing_m, carrier_ghz, spacing2_m=None, path_gain=1.0):
        """Build from element spacing in meters and carrier frequency in GHz."""
        if not carrier_ghz > 0 or not spacing_m > 0:
            raise InvalidGeometryError("spacing and carrier frequency must be positive")
        wavelength = SPEED_OF_LIGHT / (carrier_ghz * 1e9)
        d2 = None if spacing2_m is None else spacing2_m / wavelength
        return cls(kind, n1, n2, spacing_m / wavelength, d2, path_gain)

    @property
    def n_elements(self):
        return self.n1 * self.n2

    @property
    def max_gain(self):
        return self.n_elements * self.path_gain ** 2

    @property
    def is_planar(self):
        return self.kind is ArrayKind.URA

    def row(self):
        """The ULA formed by one active row of this array."""
        return ArrayGeometry.ula(self.n1, self.d1_over_lambda, self.path_gain)

    def check_grating_lobes(self, max_steer_deg):
        """Warn and return False if a spacing exceeds the grating-lobe-free limit."""
        limit = max_grating_free_spacing(max_steer_deg)
        spacings = [self.d1_over_lambda] + ([self.d2_over_lambda] if self.is_planar else [])
        if max(spacings) > limit:
            warnings.warn(
                f"d/lambda {max(spacings):.4f} exceeds {limit:.4f}: grating lobes appear "
                f"when steering to {max_steer_deg} deg",
                GratingLobeWarning,
                stacklevel=2,
            )
            return False
        return True


@dataclass(frozen=True)
class PhaseShifterSpec:
    """M-bit phase shifter. bits = math.inf stands for continuous phases."""

    bits: float = math.inf

    def __post_init__(self):
        if self.bits != math.inf and (int(self.bits) != self.bits or self.bits < 1):
            raise ValueError(f"phase shifter bits must be a positive integer, got {self.bits}")

    @property
    def is_quantized(self):
        return self.bits != math.inf

    @property
    def levels(self):
        return 2 ** int(self.bits) if self.is_quantized else math.inf

    @property
    def step_rad(self):
        return 2 * math.pi / self.levels if self.is_quantized else 0.0


def initial_codebook_size(geom, spec):
    """Size (2^M)^N of the exhaustive codebook, None for continuous phases."""
    if not spec.is_quantized:
        return None
    return spec.levels ** geom.n_elements


def geometry_fingerprint(geom, spec=None):
    """Short sha256 tag of the geometry and phase-shifter resolution."""
    bits = "inf" if spec is None or not spec.is_quantized else str(int(spec.bits))
    text = (
        f"kind={geom.kind.value};n1={geom.n1};n2={geom.n2};"
        f"d1={geom.d1_over_lambda:.12g};d2={geom.d2_over_lambda:.12g};"
        f"beta={geom.path_gain:.12g};bits={bits}"
    )
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _check_angle(value, name="angle"):
    if not -90.0 <= value <= 90.0:
        raise AngleDomainError(f"{name} {value} deg outside [-90, 90]")


@dataclass(frozen=True)
class Direction:
    """Pointing or arrival direction. ULA: theta_x_deg only. URA: theta_x_deg and theta_y_deg."""

    theta_x_deg: float
    theta_y_deg: float = None

    def __post_init__(self):
        _check_angle(self.theta_x_deg, "theta_x")
        if self.theta_y_deg is not None:
            _check_angle(self.theta_y_deg, "theta_y")

    @classmethod
    def linear(cls, theta_deg):
        return cls(float(theta_deg))

    @classmethod
    def planar(cls, theta_x_deg, theta_y_deg):
        return cls(float(theta_x_deg), float(theta_y_deg))

    @classmethod
    def from_azel(cls, theta1_deg, theta2_deg):
        return cls.planar(*azel_to_xy(theta1_deg, theta2_deg))

    @classmethod
    def from_angles(cls, angles):
        angles = [float(a) for a in np.atleast_1d(angles)]
        return cls(*angles)

    @property
    def theta_deg(self):
        return self.theta_x_deg

    @property
    def is_planar(self):
        return self.theta_y_deg is not None

    @property
    def angles(self):
        return (self.theta_x_deg,) if self.theta_y_deg is None else (self.theta_x_deg, self.theta_y_deg)

    @property
    def azel(self):
        """(theta1, theta2) azimuth-elevation pair of a planar direction."""
        if not self.is_planar:
            raise AngleDomainError("azimuth-elevation is defined for planar directions only")
        return xy_to_azel(self.theta_x_deg, self.theta_y_deg)


@dataclass(frozen=True, eq=False)
class SteeringVector:
    weights: np.ndarray
    pointing: Direction = None
    quantized_bits: int = None

    def __post_init__(self):
        weights = np.array(self.weights, dtype=complex).ravel()
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.size

    @property
    def phases(self):
        """Per-element phases in [0, 2pi)."""
        return np.mod(np.angle(self.weights), 2 * np.pi)

    @classmethod
    def from_phases(cls, phases, pointing=None, quantized_bits=None):
        phases = np.asarray(phases, dtype=float)
        return cls(np.exp(1j * phases) / np.sqrt(phases.size), pointing, quantized_bits)

    def is_unit_modulus(self, atol=UNIT_MODULUS_ATOL):
        return bool(np.allclose(np.abs(self.weights), 1 / np.sqrt(self.weights.size), rtol=0, atol=atol))


def _linear_phases(n, d_over_lambda, sines):
    """exp(j*2pi*(d/lambda)*k*sin) for k = 0..n-1, one row per sine value."""
    sines = np.atleast_1d(np.asarray(sines, dtype=float))
    k = np.arange(n)
    return np.exp(1j * 2 * np.pi * d_over_lambda * np.outer(sines, k))


def manifold_ula(geom, theta_deg):
    """ULA response a(theta): path gain times unit-modulus phase terms."""
    if geom.kind is not ArrayKind.ULA:
        raise InvalidGeometryError(f"manifold_ula needs a ULA, got {geom.kind.value}")
    _check_angle(theta_deg, "theta")
    sine = math.sin(math.radians(theta_deg))
    return geom.path_gain * _linear_phases(geom.n1, geom.d1_over_lambda, sine)[0]


def manifold_ura(geom, direction):
    """Kronecker-ordered URA response for a planar Direction."""
    if geom.kind is not ArrayKind.URA:
        raise InvalidGeometryError(f"manifold_ura needs a URA, got {geom.kind.value}")
    if not direction.is_planar:
        raise AngleDomainError("a URA manifold needs a planar direction")
    v1 = _linear_phases(geom.n1, geom.d1_over_lambda, math.sin(math.radians(direction.theta_x_deg)))[0]
    v2 = _linear_phases(geom.n2, geom.d2_over_lambda, math.sin(math.radians(direction.theta_y_deg)))[0]
    return geom.path_gain * np.kron(v1, v2)


def manifold_ura_azel(geom, theta1_deg, theta2_deg):
    """URA manifold written directly in azimuth-elevation."""
    if geom.kind is not ArrayKind.URA:
        raise InvalidGeometryError(f"manifold_ura_azel needs a URA, got {geom.kind.value}")
    t1, t2 = math.radians(theta1_deg), math.radians(theta2_deg)
    v1 = _linear_phases(geom.n1, geom.d1_over_lambda, math.sin(t2) * math.sin(t1))[0]
    v2 = _linear_phases(geom.n2, geom.d2_over_lambda, math.sin(t2) * math.cos(t1))[0]
    return geom.path_gain * np.kron(v1, v2)


def manifold(geom, direction):
    if geom.kind is ArrayKind.ULA:
        return manifold_ula(geom, direction.theta_deg)
    return manifold_ura(geom, direction)


def manifold_matrix(geom, angles_deg):
    """Stacked manifolds, one row per direction.

    angles_deg has shape (P,) for a ULA and (P, 2) for a URA, columns (theta_x, theta_y).
    """
    angles = np.radians(np.asarray(angles_deg, dtype=float))
    if geom.kind is ArrayKind.ULA:
        rows = _linear_phases(geom.n1, geom.d1_over_lambda, np.sin(angles.reshape(-1)))
    else:
        angles = angles.reshape(-1, 2)
        v1 = _linear_phases(geom.n1, geom.d1_over_lambda, np.sin(angles[:, 0]))
        v2 = _linear_phases(geom.n2, geom.d2_over_lambda, np.sin(angles[:, 1]))
        rows = np.einsum("pi,pj->pij", v1, v2).reshape(len(angles), geom.n_elements)
    return geom.path_gain * rows


def optimal_steering(manifold_vector, pointing=None):
    """Phase-conjugate steering vector, the gain-maximizing unit-modulus weights."""
    a = np.asarray(manifold_vector, dtype=complex).ravel()
    if a.size == 0:
        raise DegenerateManifoldError("empty manifold")
    if np.any(a == 0):
        raise DegenerateManifoldError("manifold has a zero element, its phase is undefined")
    return SteeringVector(np.exp(-1j * np.angle(a)) / np.sqrt(a.size), pointing)


def steering_for(geom, direction):
    return optimal_steering(manifold(geom, direction), pointing=direction)


def quantize_steering(v, spec):
    """Round every phase to the nearest of 2^M levels on the circle, ties to the lower level."""
    if not spec.is_quantized:
        return v
    step = spec.step_rad
    k = np.mod(np.ceil(v.phases / step - 0.5), spec.levels)
    return SteeringVector.from_phases(k * step, v.pointing, int(spec.bits))


def array_gain(manifold_vector, w):
    """Beamforming gain |a^T w|^2 of one manifold vector."""
    a = np.asarray(manifold_vector, dtype=complex).ravel()
    weights = w.weights if isinstance(w, SteeringVector) else np.asarray(w, dtype=complex).ravel()
    if a.size != weights.size:
        raise DimensionError(f"manifold has {a.size} elements, steering vector {weights.size}")
    return float(abs(np.dot(a, weights)) ** 2)


def gain_matrix(manifolds, weights):
    """|A @ W.T|^2 for manifolds (P, N) and steering weights (K, N): shape (P, K)."""
    manifolds = np.atleast_2d(manifolds)
    weights = np.atleast_2d(weights)
    if manifolds.shape[1] != weights.shape[1]:
        raise DimensionError(f"manifolds have {manifolds.shape[1]} elements, weights {weights.shape[1]}")
    return np.abs(manifolds @ weights.T) ** 2


def azel_to_xy(theta1_deg, theta2_deg):
    """(azimuth, elevation) -> (theta_x, theta_y) with sin(tx) = sin(t2)sin(t1), sin(ty) = sin(t2)cos(t1)."""
    t1, t2 = math.radians(theta1_deg), math.radians(theta2_deg)
    sx = math.sin(t2) * math.sin(t1)
    sy = math.sin(t2) * math.cos(t1)
    if abs(sx) > 1 or abs(sy) > 1:
        raise AngleDomainError(f"({theta1_deg}, {theta2_deg}) deg maps outside the visible region")
    return math.degrees(math.asin(sx)), math.degrees(math.asin(sy))


def xy_to_azel(theta_x_deg, theta_y_deg):
    """Inverse of azel_to_xy, theta2 in [0, 90] and theta1 in (-180, 180]."""
    sx = math.sin(math.radians(theta_x_deg))
    sy = math.sin(math.radians(theta_y_deg))
    radius = math.hypot(sx, sy)
    if radius > 1 + 1e-12:
        raise AngleDomainError(
            f"(theta_x, theta_y) = ({theta_x_deg}, {theta_y_deg}) deg is outside the visible hemisphere"
        )
    theta2 = math.degrees(math.asin(min(radius, 1.0)))
    theta1 = math.degrees(math.atan2(sx, sy)) if radius > 0 else 0.0
    return theta1, theta2
