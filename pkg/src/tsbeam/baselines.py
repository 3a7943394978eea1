"""Reference beamformers: full CSI, exhaustive codebook sweep, multi-beam DFT combining."""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalDegeneracyError


class BaselineKind(enum.Enum):
    EXHAUSTIVE_NF = "exhaustive_nf"
    MULTI_BEAM = "multi_beam"
    FULL_CSI = "full_csi"


@dataclass
class BaselineOutcome:
    w_data: np.ndarray
    pilots_used: int
    label: BaselineKind


def achievable_rate(h, w, noise_var):
    """``log2(1 + |w^H h|^2 / noise_var)`` in bits/s/Hz."""
    return float(np.log2(1.0 + abs(np.vdot(w, h)) ** 2 / noise_var))


def _noise(rng, noise_var, size):
    return np.sqrt(noise_var / 2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def full_csi_bound(channel, noise_var):
    h = channel.h
    norm = np.linalg.norm(h)
    if not norm > 0:
        raise NumericalDegeneracyError("zero channel")
    out = BaselineOutcome(h / norm, 0, BaselineKind.FULL_CSI)
    return out, float(np.log2(1.0 + norm**2 / noise_var))


def exhaustive_nf_search(channel, codebook, noise_var, rng):
    """Sweep every codeword once and keep the one with the largest ``|y|``."""
    if len(codebook) == 0:
        raise InvalidArgumentError("empty codebook")
    y = codebook.words.conj() @ channel.h
    y = y.conj() + _noise(rng, noise_var, len(codebook))
    best = int(np.argmax(np.abs(y)))
    return BaselineOutcome(codebook.words[best].copy(), len(codebook), BaselineKind.EXHAUSTIVE_NF)


def multi_beam_estimate(channel, F, noise_var, rng):
    """Probe all DFT beams and read the DFT-domain channel off the complex feedback."""
    y = channel.h.conj() @ F.beams + _noise(rng, noise_var, F.n)
    return y.conj()


def multi_beam_combination(channel, F, noise_var, rng):
    g_hat = multi_beam_estimate(channel, F, noise_var, rng)
    w = F.beams @ g_hat
    norm = np.linalg.norm(w)
    if not norm > 0:
        raise NumericalDegeneracyError("reconstructed channel is zero")
    return BaselineOutcome(w / norm, F.n, BaselineKind.MULTI_BEAM)
