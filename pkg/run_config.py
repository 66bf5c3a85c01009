"""YAML run configuration validated with pydantic."""
import logging
from typing import Any, Dict, List, Literal, Optional, Tuple

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from array_model import ArrayGeometry, ArrayKind, PhaseShifterSpec
from codebook_io import run_fingerprint
from codebook_refine import VisibilityGrid
from coverage_analysis import ThresholdSpec
from errors import BeamCoverError, ConfigError

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP_DEG = {ArrayKind.ULA: 0.1, ArrayKind.URA: 0.5}


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryBlock(_Block):
    kind: ArrayKind
    n1: PositiveInt
    n2: PositiveInt = 1
    d1_over_lambda: Optional[PositiveFloat] = None
    d2_over_lambda: Optional[PositiveFloat] = None
    spacing_m: Optional[PositiveFloat] = None
    spacing2_m: Optional[PositiveFloat] = None
    carrier_ghz: Optional[PositiveFloat] = None
    bits: Optional[PositiveInt] = None
    path_gain: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _check_spacing(self):
        if (self.d1_over_lambda is None) == (self.spacing_m is None):
            raise ValueError("give exactly one of d1_over_lambda or spacing_m")
        if self.spacing_m is not None and self.carrier_ghz is None:
            raise ValueError("spacing_m needs carrier_ghz")
        if self.kind is ArrayKind.ULA and self.n2 != 1:
            raise ValueError(f"a ULA has n2 = 1, got {self.n2}")
        return self

    def build(self):
        if self.spacing_m is not None:
            return ArrayGeometry.from_physical(
                self.kind, self.n1, self.n2, self.spacing_m, self.carrier_ghz, self.spacing2_m, self.path_gain
            )
        return ArrayGeometry(self.kind, self.n1, self.n2, self.d1_over_lambda, self.d2_over_lambda, self.path_gain)


class ThresholdBlock(_Block):
    gamma_db: PositiveFloat


class VisibilityBlock(_Block):
    x: Tuple[float, float] = (-60.0, 60.0)
    y: Tuple[float, float] = (-60.0, 60.0)

    @field_validator("x", "y")
    @classmethod
    def _ordered(cls, value):
        lo, hi = value
        if not -90.0 <= lo <= hi <= 90.0:
            raise ValueError(f"need -90 <= min <= max <= 90, got [{lo}, {hi}]")
        return value


class GridBlock(_Block):
    step_deg: Optional[PositiveFloat] = None
    candidate_step_deg: Optional[PositiveFloat] = None
    region_source: Literal["analytic", "numeric"] = "analytic"
    numeric_scan_step_deg: PositiveFloat = 0.01


class AnalyzeBlock(_Block):
    thetas_deg: List[float] = [0.0, 15.0, 30.0, 45.0, 60.0]
    delta_span_deg: PositiveFloat = 20.0
    delta_step_deg: PositiveFloat = 0.05
    scan_step_deg: PositiveFloat = 1e-4
    discrepancy_n: List[PositiveInt] = [10, 20]
    discrepancy_gamma_f: List[float] = [2.0, 3.0, 4.0, 5.0]

    @field_validator("thetas_deg")
    @classmethod
    def _visible(cls, value):
        for theta in value:
            if not -90.0 <= theta <= 90.0:
                raise ValueError(f"theta {theta} deg outside [-90, 90]")
        return value

    @field_validator("discrepancy_gamma_f")
    @classmethod
    def _above_one(cls, value):
        for gamma_f in value:
            if not gamma_f > 1:
                raise ValueError(f"gamma_f must exceed 1, got {gamma_f}")
        return value


class SimulateBlock(_Block):
    n_trials: PositiveInt = 10000
    seed: NonNegativeInt = 0
    noise_std_db: NonNegativeFloat = 0.0


class OutputBlock(_Block):
    directory: str = "out"


class RunConfig(_Block):
    geometry: GeometryBlock
    threshold: ThresholdBlock
    visibility: VisibilityBlock = VisibilityBlock()
    grid: GridBlock = GridBlock()
    analyze: AnalyzeBlock = AnalyzeBlock()
    simulate: SimulateBlock = SimulateBlock()
    output: OutputBlock = OutputBlock()
    run: Optional[Dict[str, Any]] = None

    def array_geometry(self):
        try:
            return self.geometry.build()
        except BeamCoverError as exc:
            raise ConfigError("geometry", str(exc)) from None

    def threshold_spec(self):
        return ThresholdSpec(self.threshold.gamma_db)

    def phase_shifter(self):
        return PhaseShifterSpec() if self.geometry.bits is None else PhaseShifterSpec(self.geometry.bits)

    def grid_step(self):
        return self.grid.step_deg or DEFAULT_GRID_STEP_DEG[self.geometry.kind]

    def visibility_limits(self):
        if self.geometry.kind is ArrayKind.URA:
            return (tuple(self.visibility.x), tuple(self.visibility.y))
        return (tuple(self.visibility.x),)

    def visibility_grid(self):
        limits = self.visibility_limits()
        return VisibilityGrid.build(limits, [self.grid_step()] * len(limits))

    def with_bits(self, bits):
        """Copy with the phase-shifter resolution overridden."""
        data = self.model_dump(mode="json")
        data["geometry"]["bits"] = bits
        return validate_config(data)

    def effective(self):
        """Plain-data rendering of the configuration without the run block."""
        return self.model_dump(mode="json", exclude={"run"})

    def fingerprint(self):
        return run_fingerprint(self.model_dump(mode="json", exclude={"run", "output"}))


def _field_name(error):
    return ".".join(str(part) for part in error["loc"]) or "config"


def validate_config(data):
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping of blocks")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(_field_name(first), first["msg"]) from None


def load_config(path):
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"{path} is not valid YAML: {exc}") from None
    config = validate_config(data)
    logger.debug("loaded config %s (fingerprint %s)", path, config.fingerprint())
    return config
