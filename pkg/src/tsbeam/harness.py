"""Monte-Carlo experiment engine: SNR sweeps over training schemes and baselines."""

import csv
import dataclasses
import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .baselines import achievable_rate, exhaustive_nf_search, full_csi_bound, multi_beam_combination
from .channel import ArrayGeometry, ScenarioConfig, sample_scenario
from .errors import ConfigError, NumericalDegeneracyError
from .policies import DetectorSignal, SchemeKind, run_training
from .posterior import PriorConfig, factorize, rbf_prior
from .transform import dft_matrix, polar_codebook

# Fixed order; a scheme's position here seeds its noise stream, so never reorder.
ALL_SCHEMES = (
    "codebook_ts",
    "continuous_ts",
    "hybrid_ts",
    "continuous_ts_unconstrained",
    "exhaustive_nf",
    "multi_beam",
    "full_csi",
)
TS_SCHEMES = {
    "codebook_ts": SchemeKind.CODEBOOK,
    "continuous_ts": SchemeKind.CONTINUOUS,
    "hybrid_ts": SchemeKind.HYBRID,
    "continuous_ts_unconstrained": SchemeKind.CONTINUOUS,
}

# Reference operating point checked (softly) in meta.json for full-size runs.
REFERENCE_POINT = {
    "n_antennas": 256,
    "n_rings": 5,
    "snr_db": 15.0,
    "scheme": "hybrid_ts",
    "rate_bps_hz": 12.8,
    "rate_tolerance": 0.7,
    "overhead": 101.4,
    "overhead_rel_tolerance": 0.5,
}


@dataclass(frozen=True)
class ExperimentConfig:
    n_antennas: int = 256
    carrier_freq: float = 3e10
    n_paths: int = 4
    distance_range: tuple = (7.0, 100.0)
    angle_range: tuple = (-math.pi / 3, math.pi / 3)
    beta: float = 1.1
    n_rings: int = 5
    epsilon: float = 0.06
    consecutive: int = 10
    budget: int | None = None  # None: one pilot per codeword
    length_scale: float = 1 / 128
    prior_scale: float = 1.0
    n_trials: int = 500
    snr_grid_db: tuple = (5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
    schemes: tuple = ALL_SCHEMES
    master_seed: int = 0
    unconstrained: bool = False
    detector_signal: str = "gain"
    relative_tolerance: bool = True
    physical_cosine: bool = False

    def __post_init__(self):
        try:
            self._validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        for name in ("distance_range", "angle_range", "snr_grid_db", "schemes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.n_antennas < 1 or self.n_paths < 1 or self.n_rings < 1:
            raise ValueError("n_antennas, n_paths and n_rings must be positive")
        if self.n_trials < 1 or self.consecutive < 1:
            raise ValueError("n_trials and consecutive must be positive")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")
        if not (self.carrier_freq > 0 and self.beta > 0 and self.length_scale > 0):
            raise ValueError("carrier_freq, beta and length_scale must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        unknown = set(self.schemes) - set(ALL_SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}; choose from {ALL_SCHEMES}")
        if not self.schemes or not self.snr_grid_db:
            raise ValueError("need at least one scheme and one SNR point")
        if len(set(self.snr_grid_db)) != len(self.snr_grid_db):
            raise ValueError("duplicate SNR points")
        DetectorSignal(self.detector_signal)
        r_min, r_max = self.distance_range
        if not 0 < r_min < r_max:
            raise ValueError("distance_range must satisfy 0 < min < max")
        if not self.angle_range[0] < self.angle_range[1]:
            raise ValueError("angle_range must be increasing")

    @classmethod
    def from_mapping(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


@dataclass(frozen=True)
class TrialRecord:
    snr_db: float
    scheme: str
    trial: int
    rate: float
    pilots: int
    converged: bool
    channel_hash: str
    error: str | None = None


@dataclass(frozen=True)
class SummaryRow:
    snr_db: float
    scheme: str
    mean_rate: float
    rate_stderr: float
    mean_overhead: float
    overhead_stderr: float
    convergence_fraction: float


def noise_var_from_snr(snr_db):
    """Noise variance for a per-antenna receive SNR under ``||h||^2 = N``."""
    if not math.isfinite(snr_db):
        raise ConfigError("snr_db must be finite")
    return 10.0 ** (-snr_db / 10.0)


class _Context:
    def __init__(self, config):
        self.geometry = ArrayGeometry.from_carrier(config.n_antennas, config.carrier_freq)
        self.scenario = ScenarioConfig(
            self.geometry,
            config.n_paths,
            config.distance_range,
            config.angle_range,
            config.physical_cosine,
        )
        self.F = dft_matrix(config.n_antennas)
        self.codebook = polar_codebook(self.geometry, config.beta, config.n_rings)
        self.prior = rbf_prior(
            config.n_antennas, PriorConfig(config.length_scale, config.prior_scale)
        )
        self.prior.factor = factorize(self.prior.cov)
        self.budget = len(self.codebook) if config.budget is None else config.budget


@functools.lru_cache(maxsize=8)
def _context(config):
    return _Context(config)


def _streams(config, snr_index, trial_index, scheme):
    key = (snr_index, trial_index)
    chan = np.random.SeedSequence(config.master_seed, spawn_key=key + (0,))
    noise = np.random.SeedSequence(
        config.master_seed, spawn_key=key + (1, ALL_SCHEMES.index(scheme))
    )
    return np.random.default_rng(chan), np.random.default_rng(noise)


def draw_channel(config, snr_index, trial_index):
    chan_rng, _ = _streams(config, snr_index, trial_index, ALL_SCHEMES[0])
    return sample_scenario(_context(config).scenario, chan_rng)


def run_scheme(config, scheme, channel, noise_var, rng, keep_trace=False):
    """Run one scheme or baseline on a given channel; returns (w_data, pilots, converged, outcome)."""
    ctx = _context(config)
    if scheme in TS_SCHEMES:
        out = run_training(
            TS_SCHEMES[scheme],
            channel,
            ctx.F,
            ctx.codebook,
            ctx.prior,
            noise_var,
            ctx.budget,
            config.epsilon,
            config.consecutive,
            rng,
            unconstrained=(
                scheme == "continuous_ts_unconstrained"
                or (config.unconstrained and scheme == "continuous_ts")
            ),
            detector_signal=config.detector_signal,
            relative_tolerance=config.relative_tolerance,
            keep_trace=keep_trace,
        )
        return out.w_data, out.pilots_used, out.converged, out
    if scheme == "exhaustive_nf":
        out = exhaustive_nf_search(channel, ctx.codebook, noise_var, rng)
    elif scheme == "multi_beam":
        out = multi_beam_combination(channel, ctx.F, noise_var, rng)
    elif scheme == "full_csi":
        out, _ = full_csi_bound(channel, noise_var)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return out.w_data, out.pilots_used, True, out


def run_trial(config, scheme, snr_db, trial_index, snr_index=None, channel=None):
    """One paired Monte-Carlo trial of ``scheme``; numerical failures are recorded."""
    if snr_index is None:
        grid = config.snr_grid_db
        snr_index = grid.index(float(snr_db)) if float(snr_db) in grid else 0
    if channel is None:
        channel = draw_channel(config, snr_index, trial_index)
    _, noise_rng = _streams(config, snr_index, trial_index, scheme)
    noise_var = noise_var_from_snr(snr_db)
    try:
        w, pilots, converged, _ = run_scheme(config, scheme, channel, noise_var, noise_rng)
    except NumericalDegeneracyError as exc:
        return TrialRecord(float(snr_db), scheme, trial_index, math.nan, 0, False,
                           channel.digest(), str(exc))
    rate = achievable_rate(channel.h, w, noise_var)
    return TrialRecord(float(snr_db), scheme, trial_index, rate, int(pilots), bool(converged),
                       channel.digest())


def _trial_block(args):
    config, snr_index, trial_index = args
    snr_db = config.snr_grid_db[snr_index]
    channel = draw_channel(config, snr_index, trial_index)
    return [
        run_trial(config, scheme, snr_db, trial_index, snr_index, channel)
        for scheme in config.schemes
    ]


def summarize(records, config):
    rows = []
    for snr_db in config.snr_grid_db:
        for scheme in config.schemes:
            sel = sorted(
                (r for r in records if r.snr_db == snr_db and r.scheme == scheme),
                key=lambda r: r.trial,
            )
            rates = np.array([r.rate for r in sel], dtype=float)
            pilots = np.array([r.pilots for r in sel], dtype=float)
            ok = np.isfinite(rates)
            rows.append(
                SummaryRow(
                    snr_db,
                    scheme,
                    _mean(rates[ok]),
                    _stderr(rates[ok]),
                    _mean(pilots[ok]),
                    _stderr(pilots[ok]),
                    float(np.mean([r.converged for r in sel])) if sel else math.nan,
                )
            )
    return rows


def _mean(x):
    return float(np.mean(x)) if x.size else math.nan


def _stderr(x):
    if x.size < 2:
        return 0.0 if x.size else math.nan
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def run_sweep(config, workers=1):
    """Run every (snr, trial) block; returns ``(summary_rows, records)`` in canonical order."""
    _context(config)
    jobs = [(config, s, t) for s in range(len(config.snr_grid_db)) for t in range(config.n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_trial_block, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        blocks = [_trial_block(job) for job in jobs]
    order = {s: i for i, s in enumerate(config.schemes)}
    records = sorted(
        (r for block in blocks for r in block),
        key=lambda r: (config.snr_grid_db.index(r.snr_db), order[r.scheme], r.trial),
    )
    return summarize(records, config), records


def reference_check(config, rows):
    """Soft comparison against the published full-size operating point, if it was run."""
    ref = REFERENCE_POINT
    applicable = (
        config.n_antennas == ref["n_antennas"]
        and config.n_rings == ref["n_rings"]
        and ref["snr_db"] in config.snr_grid_db
        and ref["scheme"] in config.schemes
    )
    if not applicable:
        return {"applicable": False}
    row = next(r for r in rows if r.snr_db == ref["snr_db"] and r.scheme == ref["scheme"])
    rate_ok = abs(row.mean_rate - ref["rate_bps_hz"]) <= ref["rate_tolerance"]
    over_ok = abs(row.mean_overhead - ref["overhead"]) <= ref["overhead_rel_tolerance"] * ref["overhead"]
    out = {
        "applicable": True,
        "reference": ref,
        "observed_rate_bps_hz": row.mean_rate,
        "observed_overhead": row.mean_overhead,
        "rate_within_tolerance": bool(rate_ok),
        "overhead_within_tolerance": bool(over_ok),
    }
    if not (rate_ok and over_ok):
        out["note"] = (
            "absolute levels depend on the SNR convention (per-antenna receive SNR with "
            "||h||^2 = N) and on the relative convergence tolerance, both reconstructed; "
            "a miss here with the desk-scale ordering checks passing points at a convention "
            "mismatch rather than an implementation error"
        )
    return out


def fmt(x):
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_outputs(out_dir, config, rows, records):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "scheme", "mean_rate_bps_hz", "rate_stderr", "mean_overhead",
                    "overhead_stderr", "convergence_fraction"])
        for r in rows:
            w.writerow([fmt(r.snr_db), r.scheme, fmt(r.mean_rate), fmt(r.rate_stderr),
                        fmt(r.mean_overhead), fmt(r.overhead_stderr), fmt(r.convergence_fraction)])
    with open(out / "raw.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "scheme", "trial", "rate", "pilots", "converged", "channel_hash"])
        for r in records:
            w.writerow([fmt(r.snr_db), r.scheme, r.trial, fmt(r.rate), r.pilots,
                        fmt(r.converged), r.channel_hash])
    failures = [dataclasses.asdict(r) for r in records if r.error]
    meta = {
        "version": __version__,
        "backend": backend(),
        "master_seed": config.master_seed,
        "config": config.to_dict(),
        "budget_resolved": _context(config).budget,
        "codebook_size": len(_context(config).codebook),
        "snr_convention": "per-antenna receive SNR; noise_var = 10**(-snr_db/10) with ||h||^2 = N",
        "failed_trials": failures,
        "reference_check": reference_check(config, rows),
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return out

