"""Command-line entry point: ``tsbeam sweep | trial | codebook``."""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import harness
from .channel import ArrayGeometry
from .errors import ConfigError, InvalidArgumentError, NumericalDegeneracyError
from .harness import ExperimentConfig
from .transform import polar_codebook

log = logging.getLogger("tsbeam")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _str_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_experiment_flags(p):
    p.add_argument("--config", type=Path, help="YAML/JSON file of ExperimentConfig fields")
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--trials", type=int, dest="n_trials")
    p.add_argument("--snr", type=_float_list, dest="snr_grid_db", help="comma-separated dB values")
    p.add_argument("--schemes", type=_str_list, help=f"comma-separated subset of {','.join(harness.ALL_SCHEMES)}")
    p.add_argument("--antennas", type=int, dest="n_antennas")
    p.add_argument("--paths", type=int, dest="n_paths")
    p.add_argument("--rings", type=int, dest="n_rings")
    p.add_argument("--budget", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--unconstrained", action="store_true", default=None)


def load_config(args):
    data = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a flat mapping")
        data.update(loaded)
    for key in ("master_seed", "n_trials", "snr_grid_db", "schemes", "n_antennas", "n_paths",
                "n_rings", "budget", "epsilon", "unconstrained"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_mapping(data)


def cmd_sweep(args):
    config = load_config(args)
    log.info("sweep: N=%d, %d SNR points x %d schemes x %d trials, %d worker(s)",
             config.n_antennas, len(config.snr_grid_db), len(config.schemes),
             config.n_trials, args.workers)
    rows, records = harness.run_sweep(config, workers=args.workers)
    out = harness.write_outputs(args.out, config, rows, records)
    for r in rows:
        log.info("%6.1f dB  %-28s rate %.3f  pilots %.1f  conv %.2f",
                 r.snr_db, r.scheme, r.mean_rate, r.mean_overhead, r.convergence_fraction)
    log.info("wrote %s", out)
    return 0


def cmd_trial(args):
    config = load_config(args)
    snr_db = args.snr_point
    snr_index = config.snr_grid_db.index(snr_db) if snr_db in config.snr_grid_db else 0
    channel = harness.draw_channel(config, snr_index, args.trial)
    noise_var = harness.noise_var_from_snr(snr_db)
    report = {
        "snr_db": snr_db,
        "trial": args.trial,
        "channel_hash": channel.digest(),
        "norm_scale": channel.norm_scale,
        "paths": [
            {"kind": p.kind.value, "theta": p.theta, "r1": p.r1, "r2": p.r2,
             "gain_re": p.gain.real, "gain_im": p.gain.imag}
            for p in channel.paths
        ],
        "schemes": {},
    }
    for scheme in config.schemes:
        _, rng = harness._streams(config, snr_index, args.trial, scheme)
        w, pilots, converged, outcome = harness.run_scheme(
            config, scheme, channel, noise_var, rng, keep_trace=True
        )
        entry = {
            "rate": harness.achievable_rate(channel.h, w, noise_var),
            "pilots": pilots,
            "converged": converged,
        }
        trace = getattr(outcome, "trace", None)
        if trace is not None:
            entry["stage1_pilots"] = outcome.stage1_pilots
            entry["trace"] = [
                {"slot": s.slot, "abs_y": s.magnitude, "stage": s.stage,
                 "codeword": "continuous" if s.codeword is None else s.codeword}
                for s in trace
            ]
        report["schemes"][scheme] = entry
    text = json.dumps(report, indent=2)
    if args.out is None:
        print(text)
    else:
        Path(args.out).write_text(text + "\n")
    return 0


def write_codebook_csv(fh, codebook):
    n = codebook.words.shape[1]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["angle_index", "ring_index", "theta", "distance_m"]
               + [f"re_{i}" for i in range(n)] + [f"im_{i}" for i in range(n)])
    for k in range(len(codebook)):
        dist = codebook.distance[k]
        word = codebook.words[k]
        w.writerow(
            [int(codebook.angle_index[k]), int(codebook.ring_index[k]), repr(float(codebook.theta[k])),
             "" if np.isinf(dist) else repr(float(dist))]
            + [repr(float(x)) for x in word.real] + [repr(float(x)) for x in word.imag]
        )


def cmd_codebook(args):
    geom = ArrayGeometry.from_carrier(args.antennas, args.carrier_freq)
    cb = polar_codebook(geom, args.beta, args.rings)
    if args.out is None:
        write_codebook_csv(sys.stdout, cb)
    else:
        with open(args.out, "w", newline="") as fh:
            write_codebook_csv(fh, cb)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="tsbeam", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="Monte-Carlo SNR sweep; writes summary.csv, raw.csv, meta.json")
    _add_experiment_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trial", help="one trial with full per-slot traces as JSON")
    _add_experiment_flags(p)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--snr-point", type=float, default=15.0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("codebook", help="dump the polar codebook as CSV")
    p.add_argument("--antennas", type=int, default=256)
    p.add_argument("--carrier-freq", type=float, default=3e10)
    p.add_argument("--beta", type=float, default=1.1)
    p.add_argument("--rings", type=int, default=5)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_codebook)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
