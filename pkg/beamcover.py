"""beamcover command line: analyze, refine and simulate steering-vector codebooks.

    python beamcover.py analyze  --config configs/ula8_coverage.yaml --out out/
    python beamcover.py refine   --config configs/ula4_refine.yaml --out out/
    python beamcover.py simulate --config configs/ula4_refine.yaml --codebook out/codebook.csv
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from array_model import Direction, geometry_fingerprint, initial_codebook_size
from codebook_io import (
    TOOL_NAME,
    TOOL_VERSION,
    provenance,
    read_codebook,
    write_codebook,
    write_csv,
    write_steering_vectors,
    write_yaml,
)
from codebook_refine import build_candidates, refine, verify_cover
from coverage_analysis import (
    ThresholdSpec,
    alpha_discrepancy,
    alpha_star_ula,
    alpha_star_ura,
    degradation_curve,
    delta_bounds,
    numeric_coverage,
)
from errors import BeamCoverError, VerificationError
from run_config import load_config
from sweep_sim import run_sweep

logger = logging.getLogger(TOOL_NAME)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.captureWarnings(True)


def _run_block(config, command, **extra):
    geom = config.array_geometry()
    block = {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": command,
        "run_fingerprint": config.fingerprint(),
        "geometry_fingerprint": geometry_fingerprint(geom),
    }
    block.update(extra)
    return block


def _manifest(config, command, **extra):
    data = config.effective()
    data["run"] = _run_block(config, command, **extra)
    return data


def _steer(geom, theta):
    return Direction.planar(theta, 0.0) if geom.is_planar else Direction.linear(theta)


def cmd_analyze(config, out_dir, args=None):
    """Coverage bounds, degradation curves and root discrepancies for the configured angles."""
    geom = config.array_geometry()
    threshold = config.threshold_spec()
    header = provenance(geometry_fingerprint(geom), config.fingerprint())
    spec = config.analyze

    coverage_rows = []
    for theta in spec.thetas_deg:
        direction = _steer(geom, theta)
        analytic = delta_bounds(geom, direction, threshold)
        numeric = numeric_coverage(geom, direction, threshold, spec.scan_step_deg)
        l_delta, u_delta = analytic.l_delta_deg[0], analytic.u_delta_deg[0]
        at_edges = degradation_curve(geom, theta, [l_delta, u_delta])
        coverage_rows.append({
            "theta_deg": theta,
            "l_delta_analytic": l_delta,
            "u_delta_analytic": u_delta,
            "l_delta_numeric": numeric.l_delta_deg[0],
            "u_delta_numeric": numeric.u_delta_deg[0],
            "degradation_at_edges": float(np.min(at_edges)),
            "clamped": analytic.clamped[0][0] or analytic.clamped[0][1],
        })
        logger.info("theta %g deg: analytic [%.4f, %.4f], numeric [%.4f, %.4f]",
                    theta, l_delta, u_delta, numeric.l_delta_deg[0], numeric.u_delta_deg[0])

    count = int(round(2 * spec.delta_span_deg / spec.delta_step_deg)) + 1
    deltas = np.round(np.linspace(-spec.delta_span_deg, spec.delta_span_deg, count), 10)
    curves = []
    for theta in spec.thetas_deg:
        curves.append(pd.DataFrame({
            "theta_deg": theta,
            "delta_deg": deltas,
            "degradation": degradation_curve(geom, theta, deltas),
        }))
    curve_frame = pd.concat(curves, ignore_index=True).dropna()

    discrepancy_rows = []
    for n in spec.discrepancy_n:
        for gamma_f in spec.discrepancy_gamma_f:
            gap = alpha_discrepancy(n, ThresholdSpec.from_factor(gamma_f))
            discrepancy_rows.append({
                "n": n,
                "gamma_f": gamma_f,
                "alpha_star": gap.alpha_star,
                "alpha_exact": gap.alpha_exact,
                "alpha_gap": gap.alpha_gap,
                "z_gap": gap.z_gap,
            })

    alpha = alpha_star_ura(threshold) if geom.is_planar else alpha_star_ula(threshold)
    written = [
        write_csv(pd.DataFrame(coverage_rows), out_dir / "coverage.csv", header),
        write_csv(curve_frame, out_dir / "degradation.csv", header),
        write_csv(pd.DataFrame(discrepancy_rows), out_dir / "alpha_discrepancy.csv", header),
        write_yaml(_manifest(config, "analyze", alpha_star=alpha.value, alpha_star_residual=alpha.residual),
                   out_dir / "manifest.yaml"),
    ]
    return written


def cmd_refine(config, out_dir, args=None):
    """Greedy-refined codebook for the configured grid, verified at every grid point."""
    geom = config.array_geometry()
    threshold = config.threshold_spec()
    spec = config.phase_shifter()
    grid = config.visibility_grid()
    geom.check_grating_lobes(max(abs(a) for limits in grid.limits_deg for a in limits))

    candidates = build_candidates(
        geom,
        grid,
        threshold,
        candidate_step_deg=config.grid.candidate_step_deg,
        region_source=config.grid.region_source,
        numeric_scan_step_deg=config.grid.numeric_scan_step_deg,
    )
    codebook = refine(candidates)
    report = verify_cover(codebook, geom, grid, threshold)
    verification = {"unquantized": report.to_dict()}
    if spec.is_quantized:
        verification["quantized"] = verify_cover(codebook, geom, grid, threshold, quantize=spec).to_dict()

    exhaustive = initial_codebook_size(geom, spec)
    run = _run_block(
        config,
        "refine",
        codebook_size=len(codebook),
        grid_size=grid.size,
        initial_codebook_size=None if exhaustive is None else str(exhaustive),
    )
    written = [
        write_codebook(codebook, out_dir / "codebook.csv", config.fingerprint()),
        write_steering_vectors(codebook, out_dir / "steering_vectors.csv", config.fingerprint(), spec),
        write_yaml({**config.effective(), "run": run}, out_dir / "manifest.yaml"),
        write_yaml({"run": run, **verification}, out_dir / "verification.yaml"),
    ]
    logger.info("codebook of %d entries for %d grid directions", len(codebook), grid.size)
    if not report.is_complete:
        raise VerificationError(
            f"{100 * report.fraction_covered:.4f}% of grid points meet the threshold, "
            f"min ratio {report.min_ratio:.6f} at {report.argmin_angles} deg"
        )
    return written


def cmd_simulate(config, out_dir, args=None):
    """Monte-Carlo beam sweep over a codebook CSV written by refine."""
    geom = config.array_geometry()
    threshold = config.threshold_spec()
    codebook_path = getattr(args, "codebook", None) or out_dir / "codebook.csv"
    codebook = read_codebook(
        codebook_path,
        geom,
        threshold,
        visibility_deg=config.visibility_limits(),
    )
    sim = config.simulate
    report = run_sweep(
        codebook,
        geom,
        sim.n_trials,
        sim.seed,
        noise_std_db=sim.noise_std_db,
        visibility=config.visibility_limits(),
        quantize=config.phase_shifter(),
    )
    header = provenance(geometry_fingerprint(geom), config.fingerprint())
    run = _run_block(config, "simulate", codebook=Path(codebook_path).name, codebook_size=len(codebook))
    return [
        write_csv(report.trials_frame(), out_dir / "trials.csv", header),
        write_csv(report.cdf_frame(), out_dir / "cdf.csv", header),
        write_yaml({"run": run, "summary": report.summary()}, out_dir / "summary.yaml"),
    ]


COMMANDS = {"analyze": cmd_analyze, "refine": cmd_refine, "simulate": cmd_simulate}


def build_parser():
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description="Steering-vector coverage and codebook refinement")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        cmd = sub.add_parser(name, help=func.__doc__)
        cmd.add_argument("--config", required=True, help="YAML run configuration")
        cmd.add_argument("--out", default=None, help="output directory (default: output.directory)")
        cmd.add_argument("--quantize-bits", type=int, default=None, help="override geometry.bits")
        if name == "simulate":
            cmd.add_argument("--codebook", default=None, help="codebook CSV (default: <out>/codebook.csv)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = load_config(args.config)
        if args.quantize_bits is not None:
            config = config.with_bits(args.quantize_bits)
        out_dir = Path(args.out or config.output.directory)
        COMMANDS[args.command](config, out_dir, args)
    except BeamCoverError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
