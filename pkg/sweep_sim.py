"""Monte-Carlo beam sweep over a refined codebook.

Every trial draws an arrival direction, sweeps all codebook beams, selects the one
with the largest (optionally noisy) measured gain and records how far the true gain
of that beam falls below the array maximum N beta^2.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from array_model import PhaseShifterSpec, gain_matrix, geometry_fingerprint, manifold_matrix
from errors import EmptyCodebookError, FingerprintMismatchError

logger = logging.getLogger(__name__)

GAP_ATOL_DB = 1e-9
_GAIN_CHUNK = 4096


@dataclass(frozen=True)
class SweepTrial:
    trial_index: int
    direction: tuple
    best_entry_index: int
    achievable_gain: float
    max_gain: float
    gap_db: float


@dataclass(frozen=True, eq=False)
class SweepReport:
    trials: tuple
    gamma_db: float
    fraction_within_gamma: float
    cdf: tuple
    rng_seed: int
    noise_std_db: float = 0.0
    codebook_size: int = 0
    quantized_bits: int = None

    @property
    def gaps_db(self):
        return np.array([t.gap_db for t in self.trials])

    def summary(self):
        gaps = self.gaps_db
        above = gaps[gaps > self.gamma_db]
        return {
            "n_trials": len(self.trials),
            "codebook_size": self.codebook_size,
            "gamma_db": self.gamma_db,
            "noise_std_db": self.noise_std_db,
            "quantized_bits": self.quantized_bits,
            "seed": self.rng_seed,
            "fraction_within_gamma": self.fraction_within_gamma,
            "mean_gap_db": float(np.mean(gaps)),
            "median_gap_db": float(np.median(gaps)),
            "p90_gap_db": float(np.percentile(gaps, 90)),
            "max_gap_db": float(np.max(gaps)),
            "trials_above_gamma": int(above.size),
            "worst_excess_db": float(above.max() - self.gamma_db) if above.size else 0.0,
        }

    def trials_frame(self):
        ndim = len(self.trials[0].direction) if self.trials else 1
        names = ["theta_deg"] if ndim == 1 else ["theta_x_deg", "theta_y_deg"]
        rows = []
        for t in self.trials:
            row = {"trial_index": t.trial_index}
            row.update(dict(zip(names, t.direction)))
            row.update(
                best_entry_index=t.best_entry_index,
                achievable_gain=t.achievable_gain,
                max_gain=t.max_gain,
                gap_db=t.gap_db,
            )
            rows.append(row)
        return pd.DataFrame(rows)

    def cdf_frame(self):
        return pd.DataFrame(list(self.cdf), columns=["gap_db", "fraction"])


def empirical_cdf(gaps):
    """Right-continuous empirical CDF as sorted (value, cumulative fraction) pairs."""
    values = np.asarray(gaps, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empirical CDF of an empty sample")
    unique, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    return tuple((float(v), float(f)) for v, f in zip(unique, fractions))


def _draw_trials(n_trials, seed, limits, n_beams, noise_std_db):
    angles = np.empty((n_trials, len(limits)))
    noise = np.zeros((n_trials, n_beams))
    lows = np.array([lo for lo, _ in limits])
    highs = np.array([hi for _, hi in limits])
    for k in range(n_trials):
        rng = np.random.default_rng([seed, k])
        angles[k] = rng.uniform(lows, highs)
        if noise_std_db > 0:
            noise[k] = rng.normal(0.0, noise_std_db, n_beams)
    return angles, noise


def run_sweep(
    codebook,
    geom,
    n_trials,
    seed,
    noise_std_db=0.0,
    visibility=None,
    quantize=None,
    directions=None,
):
    """Sweep the codebook for n_trials random arrival directions (or the given ones)."""
    if len(codebook) == 0:
        raise EmptyCodebookError("cannot sweep an empty codebook")
    if codebook.fingerprint != geometry_fingerprint(geom):
        raise FingerprintMismatchError(geometry_fingerprint(geom), codebook.fingerprint)
    if noise_std_db < 0:
        raise ValueError(f"noise_std_db must be non-negative, got {noise_std_db}")
    ndim = 2 if geom.is_planar else 1
    limits = visibility or codebook.visibility_deg or ((-90.0, 90.0),) * ndim
    if directions is None:
        if n_trials < 1:
            raise ValueError(f"n_trials must be at least 1, got {n_trials}")
        angles, noise = _draw_trials(n_trials, seed, limits, len(codebook), noise_std_db)
    else:
        angles = np.asarray(directions, dtype=float).reshape(-1, ndim)
        n_trials = len(angles)
        _, noise = _draw_trials(n_trials, seed, limits, len(codebook), noise_std_db)

    weights = codebook.weights_matrix(quantize)
    selected = np.empty(n_trials, dtype=int)
    achievable = np.empty(n_trials)
    for start in range(0, n_trials, _GAIN_CHUNK):
        stop = min(start + _GAIN_CHUNK, n_trials)
        gains = gain_matrix(manifold_matrix(geom, angles[start:stop]), weights)
        with np.errstate(divide="ignore"):
            measured_db = 10 * np.log10(gains) + noise[start:stop]
        pick = np.argmax(measured_db, axis=1)
        selected[start:stop] = pick
        achievable[start:stop] = gains[np.arange(stop - start), pick]

    max_gain = geom.max_gain
    with np.errstate(divide="ignore"):
        gaps = 10 * np.log10(max_gain / achievable)
    trials = tuple(
        SweepTrial(k, tuple(float(a) for a in angles[k]), int(selected[k]), float(achievable[k]), max_gain, float(gaps[k]))
        for k in range(n_trials)
    )
    gamma_db = codebook.threshold.gamma_db
    bits = int(quantize.bits) if isinstance(quantize, PhaseShifterSpec) and quantize.is_quantized else None
    report = SweepReport(
        trials=trials,
        gamma_db=gamma_db,
        fraction_within_gamma=float(np.mean(gaps <= gamma_db)),
        cdf=empirical_cdf(gaps),
        rng_seed=seed,
        noise_std_db=noise_std_db,
        codebook_size=len(codebook),
        quantized_bits=bits,
    )
    logger.info(
        "%d trials over %d beams: %.2f%% within %.2f dB, max gap %.4f dB",
        n_trials, len(codebook), 100 * report.fraction_within_gamma, gamma_db, float(np.max(gaps)),
    )
    return report
