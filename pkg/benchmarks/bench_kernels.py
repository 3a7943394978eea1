"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py --sizes 64,256 --repeats 200
"""

import argparse
import os
import subprocess
import sys
import tempfile
import time
import timeit

import numpy as np

from tsbeam import kernels
from tsbeam.channel import ArrayGeometry
from tsbeam.posterior import rbf_prior
from tsbeam.transform import polar_codebook


def _state(n, rng):
    belief = rbf_prior(n)
    cov = belief.cov + 1e-3 * np.eye(n)
    factor = np.linalg.cholesky(cov)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return belief.mean.copy(), cov, factor, v / np.linalg.norm(v)


def bench_rank1(fn, n, repeats, rng):
    mean, cov, factor, v = _state(n, rng)
    # large noise keeps the state well conditioned across repeats
    return min(timeit.repeat(lambda: fn(mean, cov, factor, v, 0.1 + 0.2j, 1e3), number=repeats, repeat=3)) / repeats


def bench_argmax(fn, n, repeats, rng):
    words = polar_codebook(ArrayGeometry.from_carrier(n, 3e10), 1.1, 5).words
    h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return min(timeit.repeat(lambda: fn(words, h), number=repeats, repeat=3)) / repeats


def bench_sweep(flag, antennas, trials):
    """Wall time of a small hybrid sweep in a fresh interpreter with the given backend flag."""
    env = dict(os.environ, TSBEAM_NUMBA=flag)
    with tempfile.TemporaryDirectory() as out:
        cmd = [sys.executable, "-m", "tsbeam", "sweep", "--antennas", str(antennas), "--trials", str(trials),
               "--snr", "15", "--schemes", "hybrid_ts", "--out", out]
        subprocess.run(cmd, env=env, check=True)  # warm the numba cache
        t0 = time.perf_counter()
        subprocess.run(cmd, env=env, check=True)
        return time.perf_counter() - t0


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--sizes", default="64,256")
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--sweep-antennas", type=int, default=256, help="0 skips the end-to-end sweep timing")
    p.add_argument("--sweep-trials", type=int, default=20)
    args = p.parse_args(argv)
    if kernels.rank1_update_nb is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    # compile outside the timed region
    bench_rank1(kernels.rank1_update_nb, 8, 1, rng)
    bench_argmax(kernels.codebook_argmax_nb, 8, 1, rng)
    print(f"{'kernel':<16}{'N':>6}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, bench, np_fn, nb_fn in (
            ("rank1_update", bench_rank1, kernels.rank1_update_np, kernels.rank1_update_nb),
            ("codebook_argmax", bench_argmax, kernels.codebook_argmax_np, kernels.codebook_argmax_nb),
        ):
            t_np = bench(np_fn, n, args.repeats, rng) * 1e6
            t_nb = bench(nb_fn, n, args.repeats, rng) * 1e6
            print(f"{name:<16}{n:>6}{t_np:>12.1f}{t_nb:>12.1f}{t_np / t_nb:>9.1f}x")
    if args.sweep_antennas:
        t_np = bench_sweep("0", args.sweep_antennas, args.sweep_trials)
        t_nb = bench_sweep("1", args.sweep_antennas, args.sweep_trials)
        print(f"\nhybrid sweep N={args.sweep_antennas}, {args.sweep_trials} trials: "
              f"numpy {t_np:.2f}s, numba {t_nb:.2f}s ({t_np / t_nb:.1f}x)")


if __name__ == "__main__":
    main()
