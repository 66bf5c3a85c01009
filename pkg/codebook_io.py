"""CSV and YAML formats: codebook export, provenance headers, manifests and fingerprints."""
import hashlib
import json
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from array_model import (
    ArrayGeometry,
    Direction,
    PhaseShifterSpec,
    SteeringVector,
    geometry_fingerprint,
    quantize_steering,
)
from codebook_refine import CodebookEntry, RefinedCodebook
from coverage_analysis import CoverageRegion
from errors import CodebookParseError, FingerprintMismatchError

logger = logging.getLogger(__name__)

TOOL_NAME = "beamcover"
TOOL_VERSION = "0.1.0"
FLOAT_FORMAT = "%.10g"


def run_fingerprint(config_data):
    """sha256 tag of a canonical JSON rendering of the effective configuration."""
    text = json.dumps(config_data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def provenance(geometry_fp, run_fp):
    return {"tool": f"{TOOL_NAME} {TOOL_VERSION}", "geometry": geometry_fp, "run": run_fp}


def write_csv(frame, path, header=None):
    """Write a DataFrame after '# key: value' provenance lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for key, value in (header or {}).items():
            f.write(f"# {key}: {value}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def read_provenance(path):
    """Leading '# key: value' lines of a CSV and how many there are."""
    header = {}
    count = 0
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
            count += 1
    return header, count


def read_table(path):
    """Provenance dict and the CSV body as strings, indexed by 1-based file line."""
    header, count = read_provenance(path)
    frame = pd.read_csv(path, skiprows=count, dtype=str, skip_blank_lines=False, index_col=False)
    frame.index = frame.index + count + 2
    return header, frame.dropna(how="all")


def geometry_header(geom, spec=None):
    """Readable geometry fields for CSV provenance."""
    spec = spec or PhaseShifterSpec()
    return {
        "kind": geom.kind.value,
        "n1": geom.n1,
        "n2": geom.n2,
        "d1_over_lambda": FLOAT_FORMAT % geom.d1_over_lambda,
        "d2_over_lambda": FLOAT_FORMAT % geom.d2_over_lambda,
        "bits": int(spec.bits) if spec.is_quantized else "inf",
    }


def geometry_from_header(header):
    """ArrayGeometry and PhaseShifterSpec named by geometry_header fields."""
    geom = ArrayGeometry(
        header["kind"],
        int(header["n1"]),
        int(header["n2"]),
        float(header["d1_over_lambda"]),
        float(header["d2_over_lambda"]),
    )
    bits = header.get("bits", "inf")
    return geom, PhaseShifterSpec() if bits == "inf" else PhaseShifterSpec(int(bits))


def write_yaml(data, path):
    """Dump a mapping as block-style YAML, keeping key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=False, default_flow_style=False)
    logger.info("wrote %s", path)
    return path


def _angle_columns(ndim):
    return ["theta_deg"] if ndim == 1 else ["theta_x_deg", "theta_y_deg"]


def _bound_columns(ndim):
    if ndim == 1:
        return ["l_delta_deg", "u_delta_deg"]
    return ["l_delta_x_deg", "u_delta_x_deg", "l_delta_y_deg", "u_delta_y_deg"]


def codebook_frame(codebook):
    """One row per entry: index, pointing angle(s), per-axis bounds, element phases in radians."""
    ndim = 2 if codebook.geometry.is_planar else 1
    n = codebook.geometry.n_elements
    columns = ["entry_index"] + _angle_columns(ndim) + _bound_columns(ndim) + [f"phase_{k}" for k in range(n)]
    rows = []
    for index, entry in enumerate(codebook):
        bounds = []
        for lower, upper in zip(entry.region.l_delta_deg, entry.region.u_delta_deg):
            bounds += [lower, upper]
        rows.append([index, *entry.direction.angles, *bounds, *entry.steering.phases])
    return pd.DataFrame(rows, columns=columns)


def write_codebook(codebook, path, run_fp):
    return write_csv(codebook_frame(codebook), path, provenance(codebook.fingerprint, run_fp))


def read_codebook(path, geom, threshold, **kwargs):
    """Load a codebook CSV written by write_codebook for the given geometry."""
    path = Path(path)
    try:
        header, count = read_provenance(path)
    except OSError as exc:
        raise CodebookParseError(path, 0, f"cannot read codebook: {exc}") from None
    expected_fp = geometry_fingerprint(geom)
    found_fp = header.get("geometry")
    if found_fp is None:
        raise CodebookParseError(path, 1, "missing '# geometry:' provenance line")
    if found_fp != expected_fp:
        raise FingerprintMismatchError(expected_fp, found_fp)

    ndim = 2 if geom.is_planar else 1
    n = geom.n_elements
    expected = ["entry_index"] + _angle_columns(ndim) + _bound_columns(ndim) + [f"phase_{k}" for k in range(n)]
    header_line = count + 1
    try:
        _, frame = read_table(path)
    except pd.errors.EmptyDataError:
        raise CodebookParseError(path, header_line, "no column header") from None
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        number = int(match.group(1)) if match else header_line
        raise CodebookParseError(path, number, f"expected {len(expected)} fields") from None
    if list(frame.columns) != expected:
        raise CodebookParseError(path, header_line, f"expected columns {','.join(expected)}")

    values = frame.apply(pd.to_numeric, errors="coerce").astype(float)
    bad = ~np.isfinite(values.to_numpy())
    if bad.any():
        row, col = np.argwhere(bad)[0]
        problem = "missing value" if pd.isna(frame.iat[row, col]) else "non-numeric value"
        raise CodebookParseError(path, int(frame.index[row]), f"{problem} in column {expected[col]}")

    entries = []
    for number, row in zip(frame.index, values.to_numpy()):
        angles = row[1:1 + ndim]
        bounds = row[1 + ndim:1 + 3 * ndim]
        phases = row[1 + 3 * ndim:]
        try:
            direction = Direction.from_angles(angles)
            region = CoverageRegion(
                center_deg=tuple(float(a) for a in angles),
                l_delta_deg=tuple(float(b) for b in bounds[0::2]),
                u_delta_deg=tuple(float(b) for b in bounds[1::2]),
                clamped=((False, False),) * ndim,
            )
        except ValueError as exc:
            raise CodebookParseError(path, int(number), str(exc)) from None
        entries.append(CodebookEntry(SteeringVector.from_phases(phases, direction), direction, region))
    if not entries:
        logger.warning("%s holds no codebook entries", path)
    logger.info("read %d codebook entries from %s", len(entries), path)
    return RefinedCodebook(tuple(entries), geom, threshold, meta={"run": header.get("run")}, **kwargs)


def steering_frame(vectors):
    """Long-format element table: entry_index, index, phase_radians, re, im."""
    frames = []
    for entry_index, v in enumerate(vectors):
        frames.append(pd.DataFrame({
            "entry_index": entry_index,
            "index": np.arange(len(v)),
            "phase_radians": v.phases,
            "re": v.weights.real,
            "im": v.weights.imag,
        }))
    if not frames:
        return pd.DataFrame(columns=["entry_index", "index", "phase_radians", "re", "im"])
    return pd.concat(frames, ignore_index=True)


def write_steering_vectors(codebook, path, run_fp, quantize=None):
    """Element weights of every entry, quantized to the phase shifter when a spec is given."""
    spec = quantize or PhaseShifterSpec()
    vectors = [quantize_steering(e.steering, spec) for e in codebook]
    header = {**provenance(codebook.fingerprint, run_fp), **geometry_header(codebook.geometry, spec)}
    return write_csv(steering_frame(vectors), path, header)
